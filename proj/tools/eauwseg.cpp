#include <iostream>

#ifdef __GLIBC__
#include <malloc.h>
#endif

#include "eauwseg/cli.hpp"

int main(int argc, char** argv) {
#ifdef __GLIBC__
    // Keep large activation buffers on the heap instead of fresh mmap pages.
    mallopt(M_MMAP_THRESHOLD, 1 << 30);
    mallopt(M_TRIM_THRESHOLD, 1 << 30);
#endif
    return eauwseg::run_cli(argc, argv, std::cout, std::cerr);
}
