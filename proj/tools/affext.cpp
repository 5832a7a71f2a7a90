#include <iostream>
#include <string>
#include <vector>

#include "affext/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return affext::run(args, std::cout, std::cerr);
}
