#include "stacklab/classify.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <limits>
#include <ostream>

namespace stacklab::classify {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// log(1 + e^z) without overflow
double softplus(double z) { return z > 0.0 ? z + std::log1p(std::exp(-z)) : std::log1p(std::exp(z)); }
double sigmoid(double z) {
    if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
    double e = std::exp(z);
    return e / (1.0 + e);
}

void axpy(Vec& y, double a, const Vec& x) {
    for (std::size_t i = 0; i < y.size(); ++i) y[i] += a * x[i];
}

}  // namespace

LossKind parse_loss(const std::string& s) {
    if (s == "logistic") return LossKind::Logistic;
    if (s == "hinge") return LossKind::Hinge;
    throw ConfigError("unknown loss: " + s);
}

std::string to_string(LossKind k) { return k == LossKind::Logistic ? "logistic" : "hinge"; }

double loss(LossKind k, const Vec& theta, const Vec& xhat, int y) {
    double m = y * dot(theta, xhat);
    if (k == LossKind::Logistic) return softplus(-m);
    return std::max(0.0, 1.0 - m);
}

double agent_payoff(const Vec& theta, const Vec& xhat, const AgentType& a) {
    if (a.y == 1) return dist2(xhat, a.x) == 0.0 ? 0.0 : -kInf;
    double d = dist2(xhat, a.x);
    return dot(theta, xhat) - 0.5 * a.alpha * d * d;
}

Vec agent_best_response(const Vec& theta, const AgentType& a) {
    if (!(a.alpha > 0.0)) throw ParameterError("manipulation cost needs alpha > 0");
    Vec x = a.x;
    if (a.y == -1) axpy(x, 1.0 / a.alpha, theta);
    return x;
}

double strategic_loss(LossKind k, const Vec& theta, const AgentType& a) {
    return loss(k, theta, agent_best_response(theta, a), a.y);
}

Vec strategic_loss_gradient(LossKind k, const Vec& theta, const AgentType& a) {
    // margin m(theta) = y <theta, x> - [y = -1] |theta|^2 / alpha
    Vec dm(theta.size());
    for (std::size_t i = 0; i < theta.size(); ++i)
        dm[i] = a.y * a.x[i] - (a.y == -1 ? 2.0 * theta[i] / a.alpha : 0.0);
    double m = a.y * dot(theta, a.x) - (a.y == -1 ? dot(theta, theta) / a.alpha : 0.0);
    double w = k == LossKind::Logistic ? -sigmoid(-m) : (m < 1.0 ? -1.0 : 0.0);
    for (double& g : dm) g *= w;
    return dm;
}

Deviation parse_deviation(const std::string& s) {
    if (s == "loss_max") return Deviation::LossMax;
    if (s == "loss_min") return Deviation::LossMin;
    if (s == "random") return Deviation::Random;
    throw ConfigError("unknown deviation: " + s);
}

std::string to_string(Deviation d) {
    switch (d) {
        case Deviation::LossMax: return "loss_max";
        case Deviation::LossMin: return "loss_min";
        case Deviation::Random: return "random";
    }
    return "unknown";
}

Vec random_unit_vector(int d, Rng& rng) {
    Vec s(d);
    double n = 0.0;
    while (n < 1e-12) {
        for (double& c : s) c = rng.normal();
        n = norm2(s);
    }
    for (double& c : s) c /= n;
    return s;
}

Vec eps_agent_response(const Vec& theta, const AgentType& a, double eps, Deviation dev, Rng& rng) {
    if (eps < 0.0) throw ParameterError("eps must be non-negative");
    Vec br = agent_best_response(theta, a);
    if (a.y == 1 || eps == 0.0) return br;
    // payoff drops by exactly (alpha/2) r^2 at distance r from the best response
    double r = std::sqrt(2.0 * eps / a.alpha) * (1.0 - 1e-12);
    int d = static_cast<int>(theta.size());
    Vec dir(d, 0.0);
    double tn = norm2(theta);
    if (dev == Deviation::Random) {
        dir = random_unit_vector(d, rng);
        r *= std::pow(rng.uniform(), 1.0 / d);
    } else if (tn == 0.0) {
        dir[0] = 1.0;
    } else {
        // loss of a negative example grows with <theta, xhat>
        double sgn = dev == Deviation::LossMax ? 1.0 : -1.0;
        for (int i = 0; i < d; ++i) dir[i] = sgn * theta[i] / tn;
    }
    axpy(br, r, dir);
    return br;
}

Vec project_ball(const Vec& w, double radius) {
    double n = norm2(w);
    if (n <= radius) return w;
    Vec p(w);
    for (double& c : p) c *= radius / n;
    return p;
}

Vec Domain::project(const Vec& w, double shrink) const {
    if (kind != "ball") throw ConfigError("no projection implemented for domain '" + kind + "'");
    return project_ball(w, shrink * radius);
}

GDwoG::GDwoG(GDwoGParams p, Domain S) : p_(p), S_(std::move(S)) {
    if (p.d < 1) throw ParameterError("gdwog: dimension must be positive");
    if (p.T < 1) throw ParameterError("gdwog: T must be positive");
    if (!(p.C > 0.0 && p.L > 0.0 && p.R >= 1.0)) throw ParameterError("gdwog: need C, L > 0 and R >= 1");
    if (S_.kind == "ball" && S_.radius != p.R) throw ConfigError("gdwog: ball domain radius must equal R");
    S_.project(Vec(p.d, 0.0), 1.0);
    delta_ = p.delta.value_or(std::sqrt(p.R * p.d * p.C / (3.0 * (p.L + p.C))) * std::pow(p.T, -0.25));
    eta_ = p.eta.value_or(p.R / (p.C * std::sqrt(static_cast<double>(p.T))));
    if (!(delta_ >= 0.0 && delta_ < 1.0)) throw ParameterError("gdwog: exploration radius must lie in [0,1)");
    v_.assign(p.d, 0.0);
}

Vec GDwoG::query(Rng& rng) {
    if (pending_) throw EpisodeError("gdwog: query issued before the previous cost was reported");
    s_ = random_unit_vector(p_.d, rng);
    Vec u = v_;
    axpy(u, delta_, s_);
    pending_ = true;
    return u;
}

void GDwoG::update(double cost) {
    if (!pending_) throw EpisodeError("gdwog: cost reported without a query");
    Vec w = v_;
    axpy(w, -eta_ * cost, s_);
    v_ = S_.project(w, 1.0 - delta_);
    pending_ = false;
    ++steps_;
}

double gdwog_regret_bound(const GDwoGParams& p) {
    double Rd = p.R * p.d;
    return 6.0 * std::pow(p.T, 0.75) * std::sqrt(p.R * p.d * p.C * (p.L + p.C)) + 5.0 * p.C * Rd * Rd;
}

Perturbation no_perturbation() {
    return [](const Vec&, const Vec&, double c, Rng&) { return c; };
}

Perturbation sign_flip_perturbation(Vec e, double lambda) {
    return [e = std::move(e), lambda](const Vec&, const Vec& s, double c, Rng&) {
        return c + (dot(s, e) >= 0.0 ? lambda : -lambda);
    };
}

Perturbation uniform_perturbation(double lambda) {
    return [lambda](const Vec&, const Vec&, double c, Rng& r) { return c + r.uniform(-lambda, lambda); };
}

GDwoGRun run_gdwog(const CostFn& c, double min_value, GDwoGParams p, std::uint64_t seed, const Perturbation& perturb,
                   bool keep_queries) {
    GDwoG alg(p, Domain{"ball", p.R});
    Rng rng = Rng(seed).substream("gdwog");
    Rng noise = Rng(seed).substream("perturbation");
    GDwoGRun out;
    for (int t = 1; t <= p.T; ++t) {
        Vec u = alg.query(rng);
        double cu = c(u);
        out.cost_sum += cu;
        if (keep_queries) out.queries.push_back(u);
        alg.update(perturb(u, alg.direction(), cu, noise));
    }
    out.regret = out.cost_sum - p.T * min_value;
    return out;
}

BiasEstimate gradient_bias(const CostFn& c, const Vec& grad_smoothed, const Vec& v, double delta, double lambda,
                           const Perturbation& perturb, long long N, std::uint64_t seed) {
    if (N < 2) throw ParameterError("gradient_bias: need at least two samples");
    if (!(delta > 0.0)) throw ParameterError("gradient_bias: delta must be positive");
    int d = static_cast<int>(v.size());
    Rng rng = Rng(seed).substream("directions");
    Rng noise = Rng(seed).substream("perturbation");
    Vec sum(d, 0.0), sq(d, 0.0);
    for (long long i = 0; i < N; ++i) {
        Vec s = random_unit_vector(d, rng);
        Vec u = v;
        axpy(u, delta, s);
        double ct = perturb(u, s, c(u), noise);
        for (int k = 0; k < d; ++k) {
            double g = d / delta * ct * s[k];
            sum[k] += g;
            sq[k] += g * g;
        }
    }
    BiasEstimate b;
    b.samples = N;
    b.target = grad_smoothed;
    b.mean.resize(d);
    double var = 0.0, diff = 0.0;
    for (int k = 0; k < d; ++k) {
        b.mean[k] = sum[k] / N;
        double vk = (sq[k] / N - b.mean[k] * b.mean[k]) * N / (N - 1);
        var += std::max(0.0, vk) / N;
        double e = b.mean[k] - grad_smoothed[k];
        diff += e * e;
    }
    b.bias = std::sqrt(diff);
    b.sigma = std::sqrt(var);
    b.bound = d * lambda / delta;
    return b;
}

std::vector<AgentType> TypeGenerator::draw(int T, std::uint64_t seed) const {
    Rng rng = Rng(seed).substream("types");
    std::vector<AgentType> out;
    out.reserve(T);
    for (int t = 0; t < T; ++t) {
        AgentType a;
        a.y = rng.bernoulli(p_pos) ? 1 : -1;
        a.alpha = alpha;
        a.x.resize(d);
        for (double& c : a.x) c = a.y * mean_shift / std::sqrt(static_cast<double>(d)) + sigma * rng.normal();
        a.x = project_ball(a.x, R);
        out.push_back(std::move(a));
    }
    return out;
}

NonmyopicClassifier::NonmyopicClassifier(NonmyopicParams p, std::uint64_t seed) : p_(p) {
    if (p.T < 1) throw ParameterError("classifier: T must be positive");
    if (!(p.alpha > 0.0)) throw ParameterError("classifier: alpha must be positive");
    if (!(p.gamma > 0.0 && p.gamma < 1.0)) throw ParameterError("classifier: gamma must lie in (0,1)");
    eps_ = p.alpha / (std::pow(p.R, 4) * p.d * std::pow(p.T, 2.5));
    if (p.copies) {
        D_ = *p.copies;
        if (D_ < 1) throw ParameterError("classifier: need at least one copy");
    } else {
        double Tg = discounted_horizon(p.gamma);
        D_ = std::max(1, static_cast<int>(std::ceil(Tg * std::log(payoff_scale() * Tg / eps_))));
    }
    if (D_ > p.T) {
        std::cerr << "warning: classifier delay " << D_ << " exceeds T = " << p.T << ", running a single copy\n";
        degenerate_ = true;
        D_ = 1;
    }
    GDwoGParams g;
    g.d = p.d;
    g.R = p.R;
    g.C = 1.0 + p.R * p.R + p.R * p.R / p.alpha;
    g.L = p.R + 2.0 * p.R / p.alpha;
    g.T = (p.T + D_ - 1) / D_;
    for (int r = 1; r <= D_; ++r) {
        copies_.emplace_back(g, Domain{"ball", p.R});
        rngs_.push_back(Rng(seed).substream("copy" + std::to_string(r)));
    }
}

double NonmyopicClassifier::payoff_scale() const { return p_.R * p_.R * (1.0 + 1.0 / p_.alpha); }

std::pair<int, int> NonmyopicClassifier::route(int t, int D) {
    if (t < 1 || D < 1) throw ParameterError("route: rounds and copies start at 1");
    return {(t - 1) % D + 1, (t - 1) / D + 1};
}

Vec NonmyopicClassifier::act(int t) {
    int r = route(t, D_).first;
    return copies_[r - 1].query(rngs_[r - 1]);
}

void NonmyopicClassifier::observe(int t, double l) { copies_[route(t, D_).first - 1].update(l); }

ClassTranscript run_classification(NonmyopicClassifier& policy, const std::vector<AgentType>& types,
                                   const AgentModel& agent, std::uint64_t seed) {
    ClassTranscript tr;
    tr.types = types;
    tr.loss = policy.params().loss;
    Rng rng = Rng(seed).substream("agent");
    switch (agent.kind) {
        case AgentModel::Kind::Exact: tr.agent_eps = 0.0; break;
        case AgentModel::Kind::Fixed: tr.agent_eps = agent.eps; break;
        case AgentModel::Kind::Induced:
            tr.agent_eps = policy.payoff_scale() * induced_epsilon(policy.params().gamma, policy.copies());
            break;
    }
    int T = static_cast<int>(types.size());
    tr.rounds.reserve(T);
    for (int t = 1; t <= T; ++t) {
        const AgentType& a = types[t - 1];
        ClassRound r;
        r.t = t;
        r.copy = NonmyopicClassifier::route(t, policy.copies()).first;
        r.theta = policy.act(t);
        r.xhat = eps_agent_response(r.theta, a, tr.agent_eps, agent.deviation, rng);
        r.loss = loss(tr.loss, r.theta, r.xhat, a.y);
        policy.observe(t, r.loss);
        tr.rounds.push_back(std::move(r));
    }
    return tr;
}

Benchmark best_fixed_classifier(LossKind k, const std::vector<AgentType>& types, const std::vector<int>& rounds,
                                double R, int grid_points, int starts, int iters) {
    if (rounds.empty()) return {};
    int d = static_cast<int>(types[rounds[0]].x.size());
    auto objective = [&](const Vec& th) {
        double s = 0.0;
        for (int i : rounds) s += strategic_loss(k, th, types[i]);
        return s;
    };
    auto gradient = [&](const Vec& th) {
        Vec g(d, 0.0);
        for (int i : rounds) axpy(g, 1.0, strategic_loss_gradient(k, th, types[i]));
        return g;
    };
    Benchmark b;
    b.grid_value = kInf;
    // coarse lattice over [-R, R]^d restricted to the ball
    int per_axis = std::max(2, static_cast<int>(std::ceil(std::pow(grid_points, 1.0 / d))) + 1);
    std::vector<int> idx(d, 0);
    Vec best_grid(d, 0.0);
    while (true) {
        Vec th(d);
        for (int i = 0; i < d; ++i) th[i] = -R + 2.0 * R * idx[i] / (per_axis - 1);
        if (norm2(th) <= R) {
            double f = objective(th);
            if (f < b.grid_value) {
                b.grid_value = f;
                best_grid = th;
            }
        }
        int j = 0;
        while (j < d && ++idx[j] >= per_axis) idx[j++] = 0;
        if (j == d) break;
    }
    std::vector<Vec> inits{Vec(d, 0.0), best_grid};
    Rng rng(mix_seed(0, "benchmark"));
    for (int s = 2; s < starts; ++s) {
        Vec th = random_unit_vector(d, rng);
        for (double& c : th) c *= R * std::pow(rng.uniform(), 1.0 / d);
        inits.push_back(th);
    }
    b.descent_value = kInf;
    Vec best_descent(d, 0.0);
    double scale = static_cast<double>(rounds.size());
    for (Vec th : inits) {
        double f = objective(th);
        double step = 1.0;
        for (int it = 0; it < iters && step > 1e-12; ++it) {
            Vec g = gradient(th);
            for (double& c : g) c /= scale;
            bool moved = false;
            while (step > 1e-12) {
                Vec cand = th;
                axpy(cand, -step, g);
                cand = project_ball(cand, R);
                double fc = objective(cand);
                if (fc < f) {
                    th = std::move(cand);
                    f = fc;
                    step *= 1.5;
                    moved = true;
                    break;
                }
                step *= 0.5;
            }
            if (!moved) break;
        }
        if (f < b.descent_value) {
            b.descent_value = f;
            best_descent = th;
        }
    }
    if (b.grid_value <= b.descent_value) {
        b.value = b.grid_value;
        b.theta = best_grid;
    } else {
        b.value = b.descent_value;
        b.theta = best_descent;
    }
    return b;
}

ClassRegret classification_regret(const ClassTranscript& tr, double R) {
    std::vector<int> all(tr.rounds.size());
    for (std::size_t i = 0; i < all.size(); ++i) all[i] = static_cast<int>(i);
    Benchmark b = best_fixed_classifier(tr.loss, tr.types, all, R);
    ClassRegret out;
    out.benchmark = b.value;
    double per = all.empty() ? 0.0 : b.value / all.size();
    double run = 0.0;
    for (const ClassRound& r : tr.rounds) {
        run += r.loss - per;
        out.cumulative.push_back(run);
    }
    out.total = run;
    return out;
}

double subsequence_regret(const ClassTranscript& tr, const std::vector<int>& rounds, double R) {
    double s = 0.0;
    for (int i : rounds) s += tr.rounds.at(i).loss;
    return s - best_fixed_classifier(tr.loss, tr.types, rounds, R).value;
}

double nonmyopic_regret_bound(const NonmyopicParams& p) {
    double Tg = discounted_horizon(p.gamma);
    return 10.0 * std::pow(Tg, 0.25) * std::sqrt(static_cast<double>(p.d)) * std::pow(p.T, 0.75) *
               std::pow(std::log(p.T * p.R * p.d / p.alpha), 0.25) +
           10.0 * p.d * p.d;
}

void write_classification_csv(std::ostream& os, const ClassTranscript& tr, const ClassRegret& reg) {
    os << "t,copy,theta,loss,regret\n";
    for (std::size_t i = 0; i < tr.rounds.size(); ++i) {
        const ClassRound& r = tr.rounds[i];
        os << r.t << ',' << r.copy << ',' << join_vec(r.theta) << ',' << format_double(r.loss) << ','
           << format_double(reg.cumulative[i]) << '\n';
    }
}

}  // namespace stacklab::classify
