#include <iostream>
#include <string>
#include <vector>

#include "sbolza/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return sbolza::cli::run(args, std::cout, std::cerr);
}
