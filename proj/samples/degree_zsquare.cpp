// Degree of z^2 on the unit disk against the density of its top pushforward.
#include <cstdio>

#include "fraccur/pushforward.hpp"

using namespace fraccur;

int main() {
    const auto f = zsquare();
    const auto U = disk(make_point({0, 0}), 1);
    const Index lo{-48, -48}, hi{48, 48};
    const auto deg = degree_field(f, U, 5, lo, hi);
    std::size_t twos = 0;
    for (std::size_t o = 0; o < deg.degree.size(); ++o) twos += deg.flagged[o] == 0 && deg.degree[o] == 2;
    std::printf("cells %zu, flagged %zu, degree 2 on %zu\n", deg.degree.size(), deg.flagged_count(), twos);
    std::printf("W^{3/4,1} seminorm of the degree: %.4f\n", degree_regularity(deg.degree, 0.25));
}
