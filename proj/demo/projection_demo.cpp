// Projects a few points onto a ball and prints the KKT multiplier.
#include <iostream>

#include "fedmeta/projection.hpp"

using namespace fedmeta;

int main() {
    const BallConstraint ball{ParamVector({0.0, 0.0}), 1.0};
    const ParamVector points[] = {ParamVector({3.0, 4.0}), ParamVector({0.3, 0.4}), ParamVector({-2.0, 0.0})};
    for (const auto& p : points) {
        const auto r = project(p, ball);
        std::cout << "(" << p[0] << ", " << p[1] << ") -> (" << r.point[0] << ", " << r.point[1] << ")  mu = "
                  << r.multiplier << (r.active ? "  [on boundary]" : "  [inside]") << '\n';
    }
}
