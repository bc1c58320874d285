#include <iostream>

#include "cli/app.hpp"

int main(int argc, char** argv) { return flowlab::cli::dispatch(argc, argv, std::cout, std::cerr); }
