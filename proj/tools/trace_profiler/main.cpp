#include "trace_profiler/cli.hpp"

int main(int argc, char** argv) { return trace_profiler::cli::run(argc, argv); }
