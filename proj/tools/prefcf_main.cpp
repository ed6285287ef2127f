#include <iostream>
#include <string>
#include <vector>

#include "prefcf/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return prefcf::dispatch(args, std::cout, std::cerr);
}
