#include <iostream>

#include "avaca/cli.hpp"

int main(int argc, char** argv) {
  return avaca::run_cli({argv + 1, argv + argc}, std::cout, std::cerr);
}
