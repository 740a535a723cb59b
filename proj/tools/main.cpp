#include "cli.hpp"

int main(int argc, char** argv) { return voxsl::run_pipeline(argc, argv); }
