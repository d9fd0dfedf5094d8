#pragma once

#include "error.hpp"
#include "survival.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <limits>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

namespace censim {

//! Malformed dataset; `line` is 1-based (the header is line 1).
class ParseError : public Error
{
public:
  ParseError(std::size_t line, const std::string& what)
    : Error("line " + std::to_string(line) + ": " + what)
    , line_(line)
  {}

  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

namespace detail {

inline std::vector<std::string_view>
split_csv(std::string_view line)
{
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.push_back(line.substr(start, pos == std::string_view::npos ? line.npos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

inline std::string_view
trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

inline bool
parse_real(std::string_view s, double& out)
{
  s = trim(s);
  if (s.empty())
    return false;
  if (s.front() == '+')
    s.remove_prefix(1);
  const auto res = std::from_chars(s.data(), s.data() + s.size(), out);
  return res.ec == std::errc() && res.ptr == s.data() + s.size();
}

} // namespace detail

//! Reads `t,delta,x1,...,xd` CSV. Blank lines are skipped.
inline Sample
read_dataset(std::istream& in)
{
  std::string line;
  std::size_t lineno = 0;
  std::size_t d = 0;
  bool header = false;
  Sample out;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 && line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0)
      line.erase(0, 3);
    if (detail::trim(line).empty())
      continue;
    const auto fields = detail::split_csv(line);
    if (!header) {
      if (fields.size() < 3 || detail::trim(fields[0]) != "t" || detail::trim(fields[1]) != "delta")
        throw ParseError(lineno, "header must be t,delta,x1,...,xd");
      for (std::size_t j = 2; j < fields.size(); ++j)
        if (detail::trim(fields[j]) != "x" + std::to_string(j - 1))
          throw ParseError(lineno, "header column " + std::to_string(j + 1) + " must be x" +
                                     std::to_string(j - 1));
      d = fields.size() - 2;
      header = true;
      continue;
    }
    if (fields.size() != d + 2)
      throw ParseError(lineno, "expected " + std::to_string(d + 2) + " columns, found " +
                                 std::to_string(fields.size()));
    Observation o;
    if (!detail::parse_real(fields[0], o.t) || !std::isfinite(o.t))
      throw ParseError(lineno, "t is not a finite number");
    const auto delta = detail::trim(fields[1]);
    if (delta == "1")
      o.delta = true;
    else if (delta == "0")
      o.delta = false;
    else
      throw ParseError(lineno, "delta must be 0 or 1, got '" + std::string(delta) + "'");
    o.x.resize(d);
    for (std::size_t j = 0; j < d; ++j)
      if (!detail::parse_real(fields[j + 2], o.x[j]) || !std::isfinite(o.x[j]))
        throw ParseError(lineno, "x" + std::to_string(j + 1) + " is not a finite number");
    out.push_back(std::move(o));
  }
  if (!header)
    throw ParseError(lineno == 0 ? 1 : lineno, "missing header");
  return out;
}

inline Sample
read_dataset(const std::string& path)
{
  std::ifstream in(path);
  if (!in)
    throw Error("cannot open '" + path + "'");
  return read_dataset(in);
}

inline void
write_dataset(std::ostream& out, std::span<const Observation> sample)
{
  const std::size_t d = sample.empty() ? 0 : sample.front().x.size();
  out << "t,delta";
  for (std::size_t j = 0; j < d; ++j)
    out << ",x" << j + 1;
  out << "\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (const auto& o : sample) {
    out << o.t << "," << (o.delta ? 1 : 0);
    for (double v : o.x)
      out << "," << v;
    out << "\n";
  }
}

//! `time,cdf` rows in jump order.
inline void
write_step_cdf(std::ostream& out, const StepCdf& cdf)
{
  out << "time,cdf\n" << std::setprecision(std::numeric_limits<double>::max_digits10);
  for (std::size_t k = 0; k < cdf.size(); ++k)
    out << cdf.jump_times()[k] << "," << cdf.cum_mass()[k] << "\n";
}

inline StepCdf
read_step_cdf(std::istream& in)
{
  std::string line;
  std::vector<double> times, mass;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (lineno == 1 || detail::trim(line).empty())
      continue;
    const auto f = detail::split_csv(line);
    double t = 0.0, m = 0.0;
    if (f.size() != 2 || !detail::parse_real(f[0], t) || !detail::parse_real(f[1], m))
      throw ParseError(lineno, "expected time,cdf");
    times.push_back(t);
    mass.push_back(m);
  }
  return StepCdf(std::move(times), std::move(mass));
}

} // namespace censim
