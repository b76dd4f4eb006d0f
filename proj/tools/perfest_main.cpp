#include "perfest/cli.hpp"

int main(int argc, char** argv) { return perfest::cli::run(argc, argv); }
