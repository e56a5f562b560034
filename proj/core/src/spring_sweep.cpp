#include "modal_strength/error.hpp"
#include "modal_strength/response_engine.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdlib>
#include <map>
#include <thread>

namespace modal_strength {

unsigned sweep_thread_count() {
    if (const char* env = std::getenv("MODAL_STRENGTH_THREADS")) {
        char* end = nullptr;
        const long v = std::strtol(env, &end, 10);
        if (end != env && v > 0) return static_cast<unsigned>(v);
    }
    return std::max(1u, std::thread::hardware_concurrency());
}

std::optional<Crossing> SweepResult::first_crossing(const std::string& mode) const {
    for (const auto& c : crossings) {
        if (c.mode == mode) return c;
    }
    return std::nullopt;
}

void track_modes(std::span<SweepPoint> points) {
    const SweepPoint* prev = nullptr;
    for (auto& pt : points) {
        if (!pt.error.empty()) continue;
        if (prev != nullptr && prev->shapes.size() == pt.shapes.size()) {
            const std::size_t n = pt.shapes.size();
            Matrix sim(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
            for (std::size_t a = 0; a < n; ++a) {
                for (std::size_t b = 0; b < n; ++b) {
                    const double na = prev->shapes[a].norm();
                    const double nb = pt.shapes[b].norm();
                    sim(static_cast<Eigen::Index>(a), static_cast<Eigen::Index>(b)) =
                        na == 0.0 || nb == 0.0 ? 0.0 : std::abs(prev->shapes[a].dot(pt.shapes[b])) / (na * nb);
                }
            }
            std::vector<std::string> labels(n);
            for (std::size_t round = 0; round < n; ++round) {
                Eigen::Index a = 0, b = 0;
                sim.maxCoeff(&a, &b);
                labels[static_cast<std::size_t>(b)] = prev->labels[static_cast<std::size_t>(a)];
                sim.row(a).setConstant(-1.0);
                sim.col(b).setConstant(-1.0);
            }
            pt.labels = std::move(labels);
        }
        prev = &pt;
    }
}

std::vector<Crossing> find_crossings(std::span<const SweepPoint> points) {
    // Series per label, in sweep order. Failed points are skipped, so a sign
    // change across one is interpolated between its neighbours.
    std::map<std::string, std::vector<std::pair<double, double>>> series;
    std::vector<std::string> order;
    for (const auto& pt : points) {
        for (std::size_t k = 0; k < pt.labels.size(); ++k) {
            auto [it, inserted] = series.try_emplace(pt.labels[k]);
            if (inserted) order.push_back(pt.labels[k]);
            it->second.emplace_back(pt.value, pt.springs[k]);
        }
    }
    std::vector<Crossing> out;
    for (const auto& label : order) {
        const auto& s = series[label];
        for (std::size_t i = 1; i < s.size(); ++i) {
            const auto [x0, y0] = s[i - 1];
            const auto [x1, y1] = s[i];
            if (!std::isfinite(y0) || !std::isfinite(y1)) continue;
            if (y0 == 0.0) continue;  // counted when entering zero
            if ((y0 > 0.0 && y1 <= 0.0) || (y0 < 0.0 && y1 >= 0.0)) {
                const double x = y1 == y0 ? x1 : x0 + (x1 - x0) * y0 / (y0 - y1);
                out.push_back({label, x, y1 > y0 ? 1 : -1});
            }
        }
    }
    std::stable_sort(out.begin(), out.end(), [&](const Crossing& a, const Crossing& b) {
        const auto ia = std::find(order.begin(), order.end(), a.mode) - order.begin();
        const auto ib = std::find(order.begin(), order.end(), b.mode) - order.begin();
        return ia < ib;
    });
    return out;
}

SweepResult spring_sweep(const std::function<PencilProblem(double)>& build, std::span<const double> values,
                         unsigned threads) {
    SweepResult result;
    result.points.resize(values.size());

    const auto evaluate = [&](std::size_t i) {
        SweepPoint& pt = result.points[i];
        pt.value = values[i];
        try {
            const ModalDecomposition dec = decompose(build(values[i]));
            pt.labels = dec.labels;
            pt.rank_labels = dec.labels;
            for (Eigen::Index k = 0; k < dec.mode_count(); ++k) {
                pt.lambdas.push_back(dec.solution.eigenvalues[k]);
                pt.springs.push_back(dec.params[static_cast<std::size_t>(k)].spring);
                pt.shapes.push_back(dec.phi_full(k));
            }
        } catch (const Error& e) {
            if (e.kind() == ErrorKind::Input || e.kind() == ErrorKind::Io) throw;
            pt.error = e.what();
        }
    };

    const unsigned workers =
        std::min<unsigned>(threads == 0 ? sweep_thread_count() : threads, static_cast<unsigned>(values.size()));
    if (workers <= 1) {
        for (std::size_t i = 0; i < values.size(); ++i) evaluate(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr failure;
        std::atomic<bool> failed{false};
        std::vector<std::thread> pool;
        for (unsigned w = 0; w < workers; ++w) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < values.size() && !failed; i = next++) {
                    try {
                        evaluate(i);
                    } catch (...) {
                        if (!failed.exchange(true)) failure = std::current_exception();
                    }
                }
            });
        }
        for (auto& t : pool) t.join();
        if (failure) std::rethrow_exception(failure);
    }
    track_modes(result.points);
    result.crossings = find_crossings(result.points);
    return result;
}

}  // namespace modal_strength
