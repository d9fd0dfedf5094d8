#include <censim/cli.hpp>

#include <iostream>

int
main(int argc, char** argv)
{
  return censim::cli::run(argc, argv, std::cout, std::cerr);
}
