// Box dimension of the snowflake boundary and the cost series of its Whitney chain.
#include <cstdio>

#include "fraccur/fractal.hpp"

using namespace fraccur;

int main() {
    const auto U = koch_snowflake(7, make_point({2.0123, 1.9871}), 4.0);
    const auto b = box_dimension(U.boundary(), 3, 7);
    std::printf("box dimension %.4f (log 4 / log 3 = %.4f)\n", b.slope, std::log(4.0) / std::log(3.0));
    for (double alpha : {0.2, 0.4}) {
        const auto wc = whitney_chain(U, alpha, 7);
        std::printf("alpha %.1f: k0 %d, ratio %.3f, %s\n", alpha, wc.whitney.k0, wc.series.ratio,
                    wc.series.converging ? "converging" : "not converging");
    }
}
