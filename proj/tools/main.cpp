#include <iostream>
#include <string>
#include <vector>

#include "dbnmix/cli.hpp"

int main(int argc, char** argv) {
  return dbnmix::run_cli(std::vector<std::string>(argv, argv + argc), std::cout, std::cerr);
}
