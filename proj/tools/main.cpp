#include "panelbreak/cli.hpp"

#include <iostream>

int main(int argc, char** argv) {
    return panelbreak::run_cli(argc, argv, std::cout, std::cerr);
}
