#include <iostream>
#include <string>
#include <vector>

#include "activepool/cli.hpp"

int main(int argc, char** argv) {
  std::vector<std::string> args(argv, argv + argc);
  return activepool::parse_and_run(args, std::cout, std::cerr);
}
