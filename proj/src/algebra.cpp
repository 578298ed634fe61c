#include "mim/algebra.hpp"

#include <set>

namespace mim {

double monomial(const std::vector<double>& x, const SpaceIndex& n) {
    double v = 1.0;
    for (size_t i = 0; i < n.c.size(); ++i)
        for (int k = 0; k < n.c[i]; ++k) v *= x[i];
    return v;
}

Endo<double> translation_endo(const std::vector<double>& x, const std::vector<MultiIndex>& rows,
                              const std::vector<MultiIndex>& cols) {
    std::set<SpaceIndex> row_support, col_support;
    for (const auto& b : rows)
        for (const auto& [n, m] : b.poly_part()) row_support.insert(n);
    for (const auto& g : cols)
        for (const auto& [n, m] : g.poly_part()) col_support.insert(n);

    SubstitutionColumns<double> phi;
    for (const auto& n : col_support) {
        auto& col = phi[n];
        for (const auto& m : row_support) {
            if (!n.leq(m)) continue;
            col[MultiIndex::poly(m)] = static_cast<double>(binomial(m, n)) * monomial(x, m - n);
        }
    }

    Endo<double> e;
    for (const auto& b : rows) {
        e.ensure_row(b);
        for (const auto& g : cols) {
            double v = 0;
            if (product_entry(b, g, phi, v)) e.set(b, g, v);
        }
    }
    return e;
}

}  // namespace mim
