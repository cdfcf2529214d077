#include <iostream>

#include "subcite/cli.hpp"

int main(int argc, char** argv) {
  return subcite::cli::run_cli(argc, argv, std::cout, std::cerr);
}
