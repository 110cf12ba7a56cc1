#include <cstdio>

int main() {
    std::puts("facecorr: CLI under construction");
    return 0;
}
