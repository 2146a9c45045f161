// Host harness entry point. Usage: harness <manifest-path>
//
// The build step compiles this file together with one candidate kernel
// source (which must define kernel_entry). See README.md for the compile
// command templates.

#include <cstdio>

#include "harness_run.hpp"

int main(int argc, char** argv) {
  if (argc != 2) {
    std::fprintf(stderr, "usage: %s <manifest-path>\n", argv[0]);
    return kfharness::kExitFile;
  }
  return kfharness::run_manifest(argv[1]);
}
