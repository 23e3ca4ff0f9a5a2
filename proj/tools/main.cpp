#include "cli.hpp"

int main(int argc, char** argv) { return ergowatch::cli::run(argc, argv); }
