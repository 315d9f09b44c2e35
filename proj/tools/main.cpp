#include <iostream>

#include "hwnas/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return hwnas::cli::run(args, std::cout, std::cerr);
}
