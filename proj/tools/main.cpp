#include "citeworth/cli.hpp"

int main(int argc, char** argv) { return citeworth::cli::run(argc, argv); }
