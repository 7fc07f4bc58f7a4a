#include "byov/cli.hpp"

int main(int argc, char** argv) { return byov::cli::run(argc, argv); }
