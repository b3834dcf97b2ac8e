#include <iostream>
#include <string>
#include <vector>

#include "sebench/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return sebench::cli::run_cli(args, std::cout, std::cerr);
}
