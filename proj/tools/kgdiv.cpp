#include <iostream>

#include "kgdiv/cli.hpp"

int main(int argc, char** argv) {
    return kgdiv::cli::run(argc, argv, std::cout, std::cerr);
}
