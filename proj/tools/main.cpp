#include <iostream>
#include <string>
#include <vector>

#include "mweforge/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return mweforge::run_cli(args, std::cout, std::cerr);
}
