#pragma once

#include <stdexcept>
#include <string>

namespace censim {

//! Raised for every domain failure (bad input, singular fits, empty criteria).
class Error : public std::runtime_error
{
public:
  explicit Error(const std::string& what)
    : std::runtime_error(what)
  {}
};

} // namespace censim
