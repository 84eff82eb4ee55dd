#include "mfvol/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return mfvol::cli::main_entry(argc, argv, std::cout, std::cerr);
}
