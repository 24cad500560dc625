#include <iostream>
#include <string>
#include <vector>

#include "phdelay/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv + 1, argv + argc);
  return phdelay::dispatch(args, std::cout, std::cerr);
}
