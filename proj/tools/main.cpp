#include "cli/context.hpp"

int main(int argc, char** argv) { return camo::cli::run(argc, argv); }
