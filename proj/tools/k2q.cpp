#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <unistd.h>

#include "k2q/cli.hpp"

int main(int argc, char** argv) {
  const std::vector<std::string> args(argv, argv + argc);
  return k2q::run_cli(args, std::cout, std::cerr, isatty(fileno(stderr)) != 0);
}
