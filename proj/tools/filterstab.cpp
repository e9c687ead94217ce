#include "filterstab/cli.hpp"

#include <iostream>

int main(int argc, char** argv)
{
    return filterstab::run_cli(argc, argv, std::cout, std::cerr);
}
