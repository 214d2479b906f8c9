#include <iostream>
#include <string>
#include <vector>

#include "typr/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return typr::run_cli(args, std::cout, std::cerr);
}
