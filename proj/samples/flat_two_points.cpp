// Flat norm of [[x]] - [[y]] on the line: min(|x - y|, 2).
#include <cstdio>

#include "fraccur/flatnorm.hpp"

using namespace fraccur;

int main() {
    for (int sep : {1, 4, 16, 40, 64}) {
        CubicalChain t(1, 0, 4);
        Face a, b;
        b.base = Index{sep};
        t.add(a, 1);
        t.add(b, -1);
        const auto r = flat_norm(t, 2);
        std::printf("|x-y| = %-8g F = %-8g backend %s\n", sep / 16.0, r.value, r.backend.c_str());
    }
}
