#include <iostream>

#include "cli.hpp"

int main(int argc, char** argv) {
  return flowpath::cli::dispatch(argc, argv, std::cout, std::cerr);
}
