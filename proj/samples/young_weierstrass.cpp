// Riemann-Stieltjes sums of W_a dW_a' for a pair above and below the Young threshold.
#include <cstdio>

#include "fraccur.hpp"

using namespace fraccur;

int main() {
    for (auto [a, b] : {std::pair{0.7, 0.7}, {0.45, 0.45}}) {
        const auto c = young_1d(weierstrass(a), weierstrass(b, 20, 2, 1.0), 12);
        std::printf("a + b = %.2f: S_12 = %.6f, ratio %.3f (theory %.3f), %s\n", a + b, c.value, c.ratio, c.theory,
                    c.cauchy ? "cauchy" : "not cauchy");
    }
}
