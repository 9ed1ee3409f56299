#include <iostream>

#include "oscillattr/cli.hpp"

int main(int argc, char** argv) {
    return oscillattr::run_cli(argc, argv, std::cout, std::cerr);
}
