#include "mim/stats.hpp"

#include <atomic>
#include <cmath>
#include <mutex>
#include <numeric>
#include <stdexcept>
#include <thread>

namespace mim {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

using Entry = std::pair<MultiIndex, MultiIndex>;

struct MemberStats {
    std::map<MultiIndex, std::vector<double>> pi, pi_minus, origin;
    std::map<MultiIndex, std::vector<std::vector<double>>> pi_fixed, pi_minus_fixed;
    std::map<Entry, std::vector<double>> gamma;
    std::map<int, double> c;
};

double mean_abs_p(const Batch& v, size_t begin, size_t end, int p) {
    double s = 0;
    for (size_t j = begin; j < end; ++j) s += std::pow(std::abs(v[j]), p);
    return s / static_cast<double>(end - begin);
}

MemberStats member_stats(const ModelConfig& cfg, const EnsembleOptions& opt, std::uint64_t seed) {
    MemberStats out;
    ModelRealization m = sample_model(cfg, seed);
    out.c = m.c;
    StationaryModel s = stationary_model(m, cfg.centering_cutoff);

    std::vector<GridPoint> pts;
    if (!opt.rs.empty()) pts = lattice_points(m.spec, opt.time_stride, opt.space_stride);
    const size_t n_lattice = pts.size();
    pts.insert(pts.end(), opt.fixed_points.begin(), opt.fixed_points.end());
    const int p = opt.moment_p;
    // an empty scale list leaves only the Gamma statistics
    Centering c = opt.rs.empty() ? Centering{} : center(s, pts);
    CenteredConvolutions cc = opt.rs.empty() ? CenteredConvolutions{} : centered_convolutions(s, c, opt.rs);
    for (const auto& b : c.rows) {
        auto& pi = out.pi[b];
        auto& pim = out.pi_minus[b];
        auto& org = out.origin[b];
        auto& pf = out.pi_fixed[b];
        auto& pmf = out.pi_minus_fixed[b];
        pf.assign(opt.fixed_points.size(), {});
        pmf.assign(opt.fixed_points.size(), {});
        for (double r : opt.rs) {
            const Batch& vp = cc.pi.at(b).at(r);
            const Batch& vm = cc.pi_minus.at(b).at(r);
            pi.push_back(mean_abs_p(vp, 0, n_lattice, p));
            pim.push_back(mean_abs_p(vm, 0, n_lattice, p));
            // the lattice starts at the origin
            org.push_back(vm[0]);
            for (size_t k = 0; k < opt.fixed_points.size(); ++k) {
                pf[k].push_back(std::pow(std::abs(vp[n_lattice + k]), p));
                pmf[k].push_back(std::pow(std::abs(vm[n_lattice + k]), p));
            }
        }
    }

    if (!opt.gamma_points.empty()) {
        std::vector<GridPoint> gp{GridPoint(static_cast<size_t>(m.spec.rank()), 0)};
        gp.insert(gp.end(), opt.gamma_points.begin(), opt.gamma_points.end());
        Centering cg = center(s, gp);
        std::vector<Endo<double>> gammas;
        for (size_t j = 1; j < gp.size(); ++j) gammas.push_back(gamma_at(cg, j, cg));
        std::set<Entry> keys;
        for (const auto& g : gammas)
            for (const auto& [b, row] : g.rows())
                for (const auto& [col, v] : row)
                    if (!(b == col)) keys.insert({b, col});
        for (const auto& key : keys) {
            auto& dst = out.gamma[key];
            for (const auto& g : gammas) dst.push_back(std::pow(std::abs(g.get(key.first, key.second)), p));
        }
    }
    return out;
}

// [member][index] -> [index][member]
std::vector<double> column(const std::vector<std::vector<double>>& rows, size_t i) {
    std::vector<double> v;
    v.reserve(rows.size());
    for (const auto& r : rows) v.push_back(r.at(i));
    return v;
}

}  // namespace

std::uint64_t member_seed(std::uint64_t master, std::uint64_t member) {
    return splitmix64(splitmix64(master) ^ splitmix64(member + 0x632be59bd9b4e019ULL));
}

Estimate mean_estimate(const std::vector<double>& xs) {
    Estimate e;
    e.n = static_cast<int>(xs.size());
    if (xs.empty()) return e;
    e.value = std::accumulate(xs.begin(), xs.end(), 0.0) / static_cast<double>(xs.size());
    if (xs.size() > 1) {
        double var = 0;
        for (double x : xs) var += (x - e.value) * (x - e.value);
        var /= static_cast<double>(xs.size() - 1);
        e.stderr = std::sqrt(var / static_cast<double>(xs.size()));
    }
    return e;
}

Estimate root_moment_estimate(const std::vector<double>& abs_p, int p) {
    Estimate m = mean_estimate(abs_p);
    Estimate e;
    e.n = m.n;
    if (m.value <= 0) return e;
    e.value = std::pow(m.value, 1.0 / p);
    e.stderr = m.stderr * e.value / (p * m.value);
    return e;
}

EnsembleResult run_ensemble(const ModelConfig& cfg, const EnsembleOptions& opt) {
    if (opt.members < 1) throw std::invalid_argument("ensemble needs at least one member");
    std::vector<MemberStats> stats(static_cast<size_t>(opt.members));
    std::atomic<int> next{0}, done{0};
    std::mutex progress_mu;
    std::exception_ptr failure;
    auto worker = [&] {
        for (;;) {
            int i = next++;
            if (i >= opt.members) return;
            try {
                stats[static_cast<size_t>(i)] = member_stats(cfg, opt, member_seed(opt.seed, static_cast<std::uint64_t>(i)));
            } catch (...) {
                std::lock_guard<std::mutex> lock(progress_mu);
                if (!failure) failure = std::current_exception();
                next = opt.members;
                return;
            }
            int k = ++done;
            if (opt.progress) {
                std::lock_guard<std::mutex> lock(progress_mu);
                opt.progress(k);
            }
        }
    };
    int threads = std::max(1, std::min(opt.threads, opt.members));
    if (threads == 1) worker();
    else {
        std::vector<std::thread> pool;
        for (int t = 0; t < threads; ++t) pool.emplace_back(worker);
        for (auto& t : pool) t.join();
    }
    if (failure) std::rethrow_exception(failure);

    EnsembleResult r;
    r.rs = opt.rs;
    r.moment_p = opt.moment_p;
    r.members = opt.members;
    r.gamma_points = opt.gamma_points;
    const auto& first = stats.front();
    for (const auto& [b, v] : first.pi) r.rows.push_back(b);
    sort_by_precedence(r.rows, cfg.params);
    const size_t nr = opt.rs.size();
    auto gather = [&](auto select) {
        std::vector<std::vector<double>> rows;
        for (const auto& s : stats) rows.push_back(select(s));
        return rows;
    };
    for (const auto& b : r.rows) {
        auto pi = gather([&](const MemberStats& s) { return s.pi.at(b); });
        auto pim = gather([&](const MemberStats& s) { return s.pi_minus.at(b); });
        auto org = gather([&](const MemberStats& s) { return s.origin.at(b); });
        for (size_t i = 0; i < nr; ++i) {
            r.pi[b].push_back(root_moment_estimate(column(pi, i), opt.moment_p));
            r.pi_minus[b].push_back(root_moment_estimate(column(pim, i), opt.moment_p));
            r.origin_mean[b].push_back(mean_estimate(column(org, i)));
        }
        for (size_t k = 0; k < opt.fixed_points.size(); ++k) {
            auto pf = gather([&](const MemberStats& s) { return s.pi_fixed.at(b)[k]; });
            auto pmf = gather([&](const MemberStats& s) { return s.pi_minus_fixed.at(b)[k]; });
            std::vector<Estimate> ep, em;
            for (size_t i = 0; i < nr; ++i) {
                ep.push_back(root_moment_estimate(column(pf, i), opt.moment_p));
                em.push_back(root_moment_estimate(column(pmf, i), opt.moment_p));
            }
            r.pi_fixed[b].push_back(ep);
            r.pi_minus_fixed[b].push_back(em);
        }
    }
    std::set<Entry> keys;
    for (const auto& s : stats)
        for (const auto& [k, v] : s.gamma) keys.insert(k);
    for (const auto& key : keys) {
        std::vector<std::vector<double>> rows;
        for (const auto& s : stats) {
            auto it = s.gamma.find(key);
            rows.push_back(it == s.gamma.end() ? std::vector<double>(opt.gamma_points.size(), 0.0) : it->second);
        }
        for (size_t j = 0; j < opt.gamma_points.size(); ++j)
            r.gamma[key].push_back(root_moment_estimate(column(rows, j), opt.moment_p));
    }
    for (const auto& s : stats)
        for (const auto& [k, v] : s.c) r.c[k].push_back(v);
    return r;
}

SlopeFit scaling_slope(const std::vector<double>& rs, const std::vector<Estimate>& v) {
    std::vector<double> y;
    for (const auto& e : v) y.push_back(e.value);
    return fit_loglog(rs, y);
}

std::vector<GridPoint> dyadic_base_points(const TorusSpec& s, int count) {
    double h = s.spacing(1);
    int cells_t = static_cast<int>(std::lround(h * h / s.spacing(0)));
    if (cells_t < 1) throw std::invalid_argument("time spacing too coarse for parabolic base points");
    std::vector<GridPoint> pts;
    for (int k = 0; k < count; ++k) {
        GridPoint x(static_cast<size_t>(s.rank()), 0);
        x[0] = cells_t << (2 * k);
        for (int a = 1; a < s.rank(); ++a) x[static_cast<size_t>(a)] = 1 << k;
        pts.push_back(x);
    }
    return pts;
}

}  // namespace mim
