#include <iostream>
#include <string>
#include <vector>

#include "macldp/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return macldp::cli::run(args, std::cout, std::cerr);
}
