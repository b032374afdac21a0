#include <iostream>

#include "histofilter/cli.hpp"

int main(int argc, char** argv) { return histofilter::dispatch(argc, argv, std::cerr); }
