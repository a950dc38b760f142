#include <algorithm>
#include <bit>
#include <cmath>

#include "stacklab/ssg.hpp"

namespace stacklab::ssg {

namespace {

Vec perturb_or_keep(const Vec& xhat, double lambda, const SecurityGame& game, int& failures) {
    for (int y = 0; y < game.n(); ++y)
        if (xhat[y] > game.W() / 2.0) return perturb(xhat, lambda, game);
    ++failures;
    return xhat;
}

void box_around(const Vec& c, double r, Vec& lo, Vec& hi) {
    lo.resize(c.size());
    hi.resize(c.size());
    for (std::size_t i = 0; i < c.size(); ++i) {
        lo[i] = std::max(0.0, c[i] - r);
        hi[i] = std::min(1.0, c[i] + r);
    }
}

}  // namespace

BatchedClinch::BatchedClinch(const SecurityGame& game, int T, double gamma, ClinchOptions opt)
    : game_(std::make_shared<SecurityGame>(game)), T_(T), gamma_(gamma), opt_(opt) {
    if (T < 1) throw ParameterError("batched-clinch: T must be positive");
    if (!(gamma > 0.0 && gamma < 1.0)) throw ParameterError("batched-clinch: gamma must lie in (0,1)");
    epochs_ = std::max(1, static_cast<int>(std::ceil(std::log2(static_cast<double>(T)))));
    min_batch_ = batch_len(1);
    xtilde_.assign(game_->n(), 0.0);
    box_lo_.assign(game_->n(), 0.0);
    box_hi_.assign(game_->n(), 1.0);
    start_epoch();
}

int BatchedClinch::batch_len(int epoch) const {
    double Tg = discounted_horizon(gamma_);
    double lambda = std::ldexp(1.0, -epoch);
    double C = game_->C();
    double arg = 200.0 * Tg * std::pow(C, 5) * game_->n() / (game_->W() * lambda);
    return std::max(1, static_cast<int>(std::ceil(Tg * std::log(arg))));
}

void BatchedClinch::start_epoch() {
    const SecurityGame& g = *game_;
    double lambda = std::ldexp(1.0, -epoch_);
    double C = g.C();
    double delta = g.W() * lambda / (6.0 * C * C);
    double eps = g.W() * lambda / (200.0 * std::pow(C, 5) * g.n());
    search_.emplace(game_, delta, box_lo_, box_hi_, eps, mix_seed(seed_, "epoch" + std::to_string(epoch_)), opt_);
    remaining_ = 0;
    pending_round_ = -1;
}

Vec BatchedClinch::act(int t) {
    info_.epoch = std::min(epoch_, epochs_);
    info_.thread = 0;
    info_.candidate = -1;
    if (remaining_ > 0 || committed_) {
        if (remaining_ > 0) --remaining_;
        info_.phase = "exploit";
        return xtilde_;
    }
    if (pending_round_ >= 0) throw EpisodeError("batched-clinch: query feedback not released before next query");
    if (search_->done()) {
        const SecurityGame& g = *game_;
        double lambda = std::ldexp(1.0, -epoch_);
        const Vec& xhat = search_->result();
        xtilde_ = perturb_or_keep(xhat, lambda, g, perturb_failures_);
        box_around(xhat, search_->delta(), box_lo_, box_hi_);
        if (epoch_ >= epochs_) {
            committed_ = true;
            ++epoch_;
            info_.phase = "exploit";
            return xtilde_;
        }
        ++epoch_;
        info_.epoch = epoch_;
        start_epoch();
    }
    Vec q = search_->query();
    pending_round_ = t;
    remaining_ = batch_len(epoch_);
    ++explore_rounds_;
    info_.phase = "explore";
    return q;
}

void BatchedClinch::observe(int s, const Vec&, int y) {
    if (s == pending_round_) {
        search_->respond(y);
        pending_round_ = -1;
    }
}

MultiThreadedClinch::MultiThreadedClinch(const SecurityGame& game, int T, ClinchOptions opt)
    : game_(std::make_shared<SecurityGame>(game)), T_(T), opt_(opt) {
    if (T < 1) throw ParameterError("multithreaded-clinch: T must be positive");
    int R = static_cast<int>(std::floor(std::log2(static_cast<double>(T)))) + 1;
    double C = game_->C();
    threads_.resize(R);
    for (int r = 0; r < R; ++r) {
        Thread& th = threads_[r];
        th.delta = game_->W() / (12.0 * C * C);
        th.lo.assign(game_->n(), 0.0);
        th.hi.assign(game_->n(), 1.0);
        restart(th, r);
    }
}

int MultiThreadedClinch::thread_of(int t) {
    if (t < 1) throw ParameterError("thread_of: rounds start at 1");
    return 1 + std::countr_zero(static_cast<unsigned>(t));
}

void MultiThreadedClinch::reseed(std::uint64_t s) {
    seed_ = s;
    for (int r = 0; r < threads(); ++r)
        if (threads_[r].restarts == 0 && threads_[r].search && threads_[r].search->queries() == 0)
            restart(threads_[r], r);
}

void MultiThreadedClinch::restart(Thread& th, int index) {
    double C = game_->C();
    double eps = th.delta / (33.0 * C * C * C * game_->n());
    std::uint64_t s = mix_seed(seed_, "thread" + std::to_string(index) + "/" + std::to_string(th.restarts));
    th.search.emplace(game_, th.delta, th.lo, th.hi, eps, s, opt_);
    th.pending_round = -1;
}

std::pair<Vec, Vec> MultiThreadedClinch::intersection_box() const {
    int n = game_->n();
    Vec lo(n, 0.0), hi(n, 1.0);
    for (int r = threads() - 1; r >= 0; --r) {
        Vec l2(lo), h2(hi);
        bool empty = false;
        for (int i = 0; i < n; ++i) {
            l2[i] = std::max(l2[i], threads_[r].lo[i]);
            h2[i] = std::min(h2[i], threads_[r].hi[i]);
            if (l2[i] > h2[i]) empty = true;
        }
        Vec probe(l2);
        if (empty || !game_->space().contains(probe, 0.0)) break;
        lo = std::move(l2);
        hi = std::move(h2);
    }
    return {lo, hi};
}

std::optional<int> MultiThreadedClinch::effective_delay() const {
    if (!explore_) return std::nullopt;
    int r = current_thread_;
    int gap = r < threads() ? (1 << r) : (1 << (r - 1));
    return gap;
}

Vec MultiThreadedClinch::act(int t) {
    int r = std::min(thread_of(t), threads());
    current_thread_ = r;
    Thread& th = threads_[r - 1];
    info_.thread = r;
    info_.candidate = -1;
    if (th.pending_round >= 0) throw EpisodeError("multithreaded-clinch: thread feedback missing");
    if (th.search->done()) {
        Vec xt = th.search->result();
        double old = th.delta;
        box_around(xt, old, th.lo, th.hi);
        th.delta = old / 2.0;
        ++th.restarts;
        restart(th, r - 1);
        cache_valid_ = false;
    }
    info_.epoch = th.restarts + 1;
    double C = game_->C();
    if (th.delta > game_->W() / (12.0 * C * C * T_)) {
        explore_ = true;
        info_.phase = "explore";
        th.pending_round = t;
        return th.search->query();
    }
    explore_ = false;
    info_.phase = "exploit";
    ++exploit_rounds_;
    auto [lo, hi] = intersection_box();
    if (!cache_valid_ || lo != cache_lo_ || hi != cache_hi_) {
        CentroidEstimator est(mix_seed(seed_, "exploit"), opt_.centroid_samples);
        Vec c = est.centroid(game_->space(), lo, hi);
        int dummy = 0;
        cached_play_ = perturb_or_keep(c, 1.0 / T_, *game_, dummy);
        cache_lo_ = lo;
        cache_hi_ = hi;
        cache_valid_ = true;
    }
    if (reference_) {
        for (int i = 0; i < game_->n(); ++i) {
            if ((*reference_)[i] < lo[i] - 1e-9 || (*reference_)[i] > hi[i] + 1e-9) {
                ++containment_failures_;
                break;
            }
        }
    }
    return cached_play_;
}

void MultiThreadedClinch::observe(int s, const Vec&, int y) {
    for (Thread& th : threads_) {
        if (th.pending_round != s) continue;
        th.pending_round = -1;
        try {
            th.search->respond(y);
        } catch (const BudgetExceeded&) {
            // poisoned thread: rerun from its current box
            ++th.restarts;
            restart(th, static_cast<int>(&th - threads_.data()));
        }
        return;
    }
}

ExploreCommitClinch::ExploreCommitClinch(const SecurityGame& game, double lambda, ClinchOptions opt)
    : game_(std::make_shared<SecurityGame>(game)), lambda_(lambda), opt_(opt) {
    if (!(lambda > 0.0 && lambda <= 1.0)) throw ParameterError("clinch-commit: lambda must lie in (0,1]");
    double C = game_->C();
    double delta = game_->W() * lambda / (6.0 * C * C);
    int n = game_->n();
    search_.emplace(game_, delta, Vec(n, 0.0), Vec(n, 1.0), 0.0, 1, opt_);
}

Vec ExploreCommitClinch::act(int) {
    if (commit_.empty() && search_->done()) {
        int failures = 0;
        commit_ = perturb_or_keep(search_->result(), lambda_, *game_, failures);
    }
    if (!commit_.empty()) {
        info_.phase = "exploit";
        return commit_;
    }
    info_.phase = "explore";
    return search_->query();
}

void ExploreCommitClinch::observe(int, const Vec&, int y) {
    if (commit_.empty() && !search_->done()) search_->respond(y);
}

}  // namespace stacklab::ssg
