#include "act2vec/envs.hpp"

#include <cmath>
#include <deque>
#include <numbers>

#include "act2vec/error.hpp"

namespace act2vec {

std::vector<std::string> Environment::action_names() const {
    std::vector<std::string> names;
    for (std::size_t a = 0; a < num_actions(); ++a) names.push_back(action_name(a));
    return names;
}

namespace {

double radians(double deg) { return deg * std::numbers::pi / 180.0; }

void check_action(std::size_t action, std::size_t n) {
    if (action >= n) throw Error("action " + std::to_string(action) + " out of range [0, " + std::to_string(n) + ")");
}

}  // namespace

// ---- drawing -----------------------------------------------------------------------------

double square_reward(const std::vector<Dir>& half_steps, double side_target) {
    constexpr double kFail = -0.1;
    if (half_steps.empty()) return kFail;
    long x = 0, y = 0;
    for (Dir d : half_steps) {
        switch (d) {
            case Dir::Left: --x; break;
            case Dir::Right: ++x; break;
            case Dir::Up: ++y; break;
            case Dir::Down: --y; break;
        }
    }
    if (x != 0 || y != 0) return kFail;

    std::vector<std::pair<Dir, std::size_t>> runs;
    for (Dir d : half_steps) {
        if (!runs.empty() && runs.back().first == d)
            ++runs.back().second;
        else
            runs.emplace_back(d, 1);
    }
    if (runs.size() > 1 && runs.front().first == runs.back().first) {
        runs.front().second += runs.back().second;
        runs.pop_back();
    }
    if (runs.size() != 4) return kFail;
    double total = 0.0;
    for (const auto& run : runs) total += std::min(side_target, static_cast<double>(run.second) / 2.0);
    return total / (4.0 * side_target);
}

const std::vector<std::string>& SquareEnv::stroke_names() {
    static const std::vector<std::string> names{"L",   "R",   "U",   "D",   "L+U", "U+R",
                                                "R+D", "D+L", "R+U", "U+L", "L+D", "D+R"};
    return names;
}

std::vector<Dir> SquareEnv::stroke_moves(std::size_t action) {
    using enum Dir;
    static const std::vector<std::vector<Dir>> moves{
        {Left, Left}, {Right, Right}, {Up, Up},    {Down, Down}, {Left, Up},   {Up, Right},
        {Right, Down}, {Down, Left}, {Right, Up}, {Up, Left},   {Left, Down}, {Down, Right}};
    check_action(action, moves.size());
    return moves[action];
}

SquareEnv::SquareEnv(SquareConfig config) : config_(config) {
    if (config_.side < 2) throw Error("square: W must be >= 2");
    if (config_.max_steps < 1) throw Error("square: max_steps must be >= 1");
}

std::string SquareEnv::action_name(std::size_t action) const {
    check_action(action, 12);
    return stroke_names()[action];
}

Observation SquareEnv::observe(bool terminal) const {
    const double scale = 2.0 * static_cast<double>(config_.side);
    return {{static_cast<double>(x_) / scale, static_cast<double>(y_) / scale,
             static_cast<double>(steps_) / static_cast<double>(config_.max_steps)},
            terminal};
}

Observation SquareEnv::reset() {
    trace_.clear();
    x_ = y_ = 0;
    steps_ = 0;
    done_ = false;
    return observe(false);
}

StepResult SquareEnv::step(std::size_t action) {
    if (done_) throw Error("square: step after episode end");
    for (Dir d : stroke_moves(action)) {
        trace_.push_back(d);
        switch (d) {
            case Dir::Left: --x_; break;
            case Dir::Right: ++x_; break;
            case Dir::Up: ++y_; break;
            case Dir::Down: --y_; break;
        }
    }
    ++steps_;
    const bool closed = x_ == 0 && y_ == 0;
    done_ = closed || steps_ >= config_.max_steps;
    StepResult r;
    r.done = done_;
    r.reward = done_ ? square_reward(trace_, static_cast<double>(config_.side)) : 0.0;
    r.observation = observe(done_);
    return r;
}

nlohmann::json SquareEnv::config() const {
    return {{"env", "square"}, {"side", config_.side}, {"max_steps", config_.max_steps}, {"seed", config_.seed}};
}

// ---- grid ------------------------------------------------------------------------------

Grid::Grid(std::size_t width, std::size_t height) : width_(width), height_(height), cells_(width * height, 0) {}

bool Grid::wall(long i, long j) const {
    if (i < 0 || j < 0 || i >= static_cast<long>(width_) || j >= static_cast<long>(height_)) return true;
    return cells_[static_cast<std::size_t>(j) * width_ + static_cast<std::size_t>(i)] != 0;
}

void Grid::set_wall(std::size_t i, std::size_t j, bool value) {
    if (i >= width_ || j >= height_) throw Error("grid: cell out of range");
    cells_[j * width_ + i] = value ? 1 : 0;
}

bool Grid::blocked(double x, double y) const {
    const auto [i, j] = cell_of(x, y);
    return wall(i, j);
}

namespace {

constexpr long kDi[4] = {1, -1, 0, 0};
constexpr long kDj[4] = {0, 0, 1, -1};

}  // namespace

std::vector<std::pair<long, long>> Grid::shortest_path(std::pair<long, long> from, std::pair<long, long> to) const {
    if (wall(from.first, from.second) || wall(to.first, to.second)) return {};
    const std::size_t n = width_ * height_;
    auto index = [&](long i, long j) { return static_cast<std::size_t>(j) * width_ + static_cast<std::size_t>(i); };
    std::vector<std::int64_t> parent(n, -1);
    std::deque<std::pair<long, long>> queue{from};
    parent[index(from.first, from.second)] = static_cast<std::int64_t>(index(from.first, from.second));
    while (!queue.empty()) {
        const auto [i, j] = queue.front();
        queue.pop_front();
        if (i == to.first && j == to.second) break;
        for (int k = 0; k < 4; ++k) {
            const long ni = i + kDi[k], nj = j + kDj[k];
            if (wall(ni, nj) || parent[index(ni, nj)] >= 0) continue;
            parent[index(ni, nj)] = static_cast<std::int64_t>(index(i, j));
            queue.emplace_back(ni, nj);
        }
    }
    if (parent[index(to.first, to.second)] < 0) return {};
    std::vector<std::pair<long, long>> path;
    std::size_t cur = index(to.first, to.second);
    const std::size_t start = index(from.first, from.second);
    while (true) {
        path.emplace_back(static_cast<long>(cur % width_), static_cast<long>(cur / width_));
        if (cur == start) break;
        cur = static_cast<std::size_t>(parent[cur]);
    }
    std::reverse(path.begin(), path.end());
    return path;
}

std::vector<std::pair<long, long>> Grid::reachable_cells(std::pair<long, long> from) const {
    std::vector<std::pair<long, long>> out;
    if (wall(from.first, from.second)) return out;
    std::vector<bool> seen(width_ * height_, false);
    auto index = [&](long i, long j) { return static_cast<std::size_t>(j) * width_ + static_cast<std::size_t>(i); };
    std::deque<std::pair<long, long>> queue{from};
    seen[index(from.first, from.second)] = true;
    while (!queue.empty()) {
        const auto [i, j] = queue.front();
        queue.pop_front();
        out.emplace_back(i, j);
        for (int k = 0; k < 4; ++k) {
            const long ni = i + kDi[k], nj = j + kDj[k];
            if (wall(ni, nj) || seen[index(ni, nj)]) continue;
            seen[index(ni, nj)] = true;
            queue.emplace_back(ni, nj);
        }
    }
    return out;
}

double Grid::ray_distance(double x, double y, double angle_deg, double max_range) const {
    constexpr double kStep = 0.05;
    const double dx = std::cos(radians(angle_deg)), dy = std::sin(radians(angle_deg));
    for (double t = kStep; t < max_range; t += kStep)
        if (blocked(x + t * dx, y + t * dy)) return t;
    return max_range;
}

Pose apply_motion(const Pose& pose, std::size_t action, const Grid& grid, int rotation_deg, double step) {
    check_action(action, 3);
    Pose next = pose;
    if (action == kForward) {
        const double dx = step * std::cos(radians(pose.heading)), dy = step * std::sin(radians(pose.heading));
        const double nx = pose.x + dx, ny = pose.y + dy;
        if (grid.blocked(pose.x + 0.5 * dx, pose.y + 0.5 * dy) || grid.blocked(nx, ny)) return pose;
        next.x = nx;
        next.y = ny;
    } else {
        const int delta = action == kRotateLeft ? rotation_deg : -rotation_deg;
        next.heading = ((pose.heading + delta) % 360 + 360) % 360;
    }
    return next;
}

namespace {

const std::vector<std::string>& nav_names() {
    static const std::vector<std::string> names{"F", "L", "R"};
    return names;
}

// World vector rotated into the agent frame (x ahead, y to the left).
std::pair<double, double> egocentric(const Pose& pose, double dx, double dy) {
    const double c = std::cos(radians(pose.heading)), s = std::sin(radians(pose.heading));
    return {dx * c + dy * s, -dx * s + dy * c};
}

void append_pose(std::vector<double>& f, const Pose& pose, double extent) {
    f.push_back(pose.x / extent);
    f.push_back(pose.y / extent);
    f.push_back(std::cos(radians(pose.heading)));
    f.push_back(std::sin(radians(pose.heading)));
}

void append_rays(std::vector<double>& f, const Pose& pose, const Grid& grid, double range) {
    for (int k = 0; k < 8; ++k) f.push_back(grid.ray_distance(pose.x, pose.y, pose.heading + 45.0 * k, range) / range);
}

}  // namespace

// ---- nav2d -------------------------------------------------------------------------------

Nav2dEnv::Nav2dEnv(Nav2dConfig config) : config_(config), rng_(config.seed) {
    if (config_.grid < 3) throw Error("nav2d: grid must be >= 3");
    if (config_.walls + config_.goals + 1 > config_.grid * config_.grid) throw Error("nav2d: too many walls and goals for the grid");
    if (config_.max_steps < 1) throw Error("nav2d: max_steps must be >= 1");
    if (config_.rotation != std::floor(config_.rotation) || config_.rotation <= 0.0)
        throw Error("nav2d: rotation must be a positive integral number of degrees");
}

std::string Nav2dEnv::action_name(std::size_t action) const {
    check_action(action, 3);
    return nav_names()[action];
}

Observation Nav2dEnv::observe(bool terminal) const {
    const double n = static_cast<double>(config_.grid);
    std::vector<double> f;
    f.reserve(14);
    append_pose(f, pose_, n);
    if (next_goal_ < goals_.size()) {
        const auto [gi, gj] = goals_[next_goal_];
        const auto [ex, ey] = egocentric(pose_, gi + 0.5 - pose_.x, gj + 0.5 - pose_.y);
        f.push_back(ex / n);
        f.push_back(ey / n);
    } else {
        f.push_back(0.0);
        f.push_back(0.0);
    }
    append_rays(f, pose_, grid_, 8.0);
    return {std::move(f), terminal};
}

Observation Nav2dEnv::reset() {
    const std::size_t n = config_.grid;
    const long centre = static_cast<long>(n / 2);
    for (int attempt = 0; attempt < 100; ++attempt) {
        Grid grid(n, n);
        std::vector<std::size_t> free;
        for (std::size_t c = 0; c < n * n; ++c)
            if (c != static_cast<std::size_t>(centre) * n + static_cast<std::size_t>(centre)) free.push_back(c);
        for (std::size_t w = 0; w < config_.walls; ++w) {
            const std::size_t pick = w + rng_.uniform_index(free.size() - w);
            std::swap(free[w], free[pick]);
            grid.set_wall(free[w] % n, free[w] / n, true);
        }
        auto reachable = grid.reachable_cells({centre, centre});
        reachable.erase(reachable.begin());  // the start cell
        if (reachable.size() < config_.goals) continue;
        std::vector<std::pair<long, long>> goals;
        for (std::size_t g = 0; g < config_.goals; ++g) {
            const std::size_t pick = g + rng_.uniform_index(reachable.size() - g);
            std::swap(reachable[g], reachable[pick]);
            goals.push_back(reachable[g]);
        }
        grid_ = std::move(grid);
        goals_ = std::move(goals);
        pose_ = {centre + 0.5, centre + 0.5, static_cast<int>(5 * rng_.uniform_index(72))};
        next_goal_ = 0;
        steps_ = 0;
        done_ = false;
        return observe(false);
    }
    throw Error("nav2d: no layout with reachable goals after 100 resamples");
}

void Nav2dEnv::set_layout(Grid grid, std::vector<std::pair<long, long>> goals, Pose pose) {
    grid_ = std::move(grid);
    goals_ = std::move(goals);
    pose_ = pose;
    next_goal_ = 0;
    steps_ = 0;
    done_ = goals_.empty();
}

StepResult Nav2dEnv::step(std::size_t action) {
    if (done_) throw Error("nav2d: step after episode end");
    pose_ = apply_motion(pose_, action, grid_, rotation());
    ++steps_;
    StepResult r;
    if (next_goal_ < goals_.size() && cell_of(pose_.x, pose_.y) == goals_[next_goal_]) {
        r.reward = 1.0;
        ++next_goal_;
    }
    done_ = next_goal_ == goals_.size() || steps_ >= config_.max_steps;
    r.done = done_;
    r.observation = observe(done_);
    return r;
}

nlohmann::json Nav2dEnv::config() const {
    return {{"env", "nav2d"},          {"grid", config_.grid},         {"walls", config_.walls},
            {"goals", config_.goals},  {"max_steps", config_.max_steps}, {"rotation", config_.rotation},
            {"seed", config_.seed}};
}

// ---- seek-avoid --------------------------------------------------------------------------

SeekAvoidEnv::SeekAvoidEnv(SeekAvoidConfig config)
    : config_(config), rng_(config.seed), arena_(config.size, config.size) {
    if (config_.size < 3) throw Error("seek-avoid: size must be >= 3");
    if (config_.n_good < 1) throw Error("seek-avoid: n_good must be >= 1");
    if (config_.max_steps < 1) throw Error("seek-avoid: max_steps must be >= 1");
    if (config_.rotation != std::floor(config_.rotation) || config_.rotation <= 0.0)
        throw Error("seek-avoid: rotation must be a positive integral number of degrees");
}

std::string SeekAvoidEnv::action_name(std::size_t action) const {
    check_action(action, 3);
    return nav_names()[action];
}

Observation SeekAvoidEnv::observe(bool terminal) const {
    const double n = static_cast<double>(config_.size);
    std::vector<double> f;
    f.reserve(20);
    append_pose(f, pose_, n);
    for (bool good : {true, false}) {
        const Apple* best = nullptr;
        double best_d = 0.0;
        for (const Apple& a : apples_) {
            if (a.eaten || a.good != good) continue;
            const double d = std::hypot(a.x - pose_.x, a.y - pose_.y);
            if (!best || d < best_d) {
                best = &a;
                best_d = d;
            }
        }
        if (best) {
            // Unit bearing in the agent frame plus distance, so steering does not depend on range.
            const auto [ex, ey] = egocentric(pose_, best->x - pose_.x, best->y - pose_.y);
            const double d = std::max(best_d, 1e-12);
            f.insert(f.end(), {ex / d, ey / d, best_d / n, 1.0});
        } else {
            f.insert(f.end(), {0.0, 0.0, 0.0, 0.0});
        }
    }
    append_rays(f, pose_, arena_, n);
    return {std::move(f), terminal};
}

Observation SeekAvoidEnv::reset() {
    const double n = static_cast<double>(config_.size);
    const double r = config_.touch_radius;
    pose_ = {n / 2.0, n / 2.0, static_cast<int>(5 * rng_.uniform_index(72))};
    apples_.clear();
    for (std::size_t i = 0; i < config_.n_good + config_.n_bad; ++i) {
        for (int attempt = 0;; ++attempt) {
            if (attempt == 1000) throw Error("seek-avoid: cannot place apples; arena too small");
            const Apple a{rng_.uniform(0.5, n - 0.5), rng_.uniform(0.5, n - 0.5), i < config_.n_good};
            bool ok = std::hypot(a.x - pose_.x, a.y - pose_.y) > 2.0 * r;
            for (const Apple& b : apples_) ok = ok && std::hypot(a.x - b.x, a.y - b.y) > 2.0 * r;
            if (ok) {
                apples_.push_back(a);
                break;
            }
        }
    }
    steps_ = 0;
    done_ = false;
    return observe(false);
}

void SeekAvoidEnv::set_layout(std::vector<Apple> apples, Pose pose) {
    apples_ = std::move(apples);
    pose_ = pose;
    steps_ = 0;
    done_ = false;
}

namespace {

double segment_distance(double ax, double ay, double bx, double by, double px, double py) {
    const double vx = bx - ax, vy = by - ay;
    const double len2 = vx * vx + vy * vy;
    double t = len2 > 0.0 ? ((px - ax) * vx + (py - ay) * vy) / len2 : 0.0;
    t = std::clamp(t, 0.0, 1.0);
    return std::hypot(ax + t * vx - px, ay + t * vy - py);
}

}  // namespace

StepResult SeekAvoidEnv::step(std::size_t action) {
    if (done_) throw Error("seek-avoid: step after episode end");
    const Pose before = pose_;
    pose_ = apply_motion(pose_, action, arena_, rotation());
    ++steps_;
    StepResult r;
    bool good_left = false;
    for (Apple& a : apples_) {
        if (!a.eaten && (before.x != pose_.x || before.y != pose_.y) &&
            segment_distance(before.x, before.y, pose_.x, pose_.y, a.x, a.y) < config_.touch_radius) {
            a.eaten = true;
            r.reward += a.good ? 1.0 : -1.0;
        }
        good_left = good_left || (a.good && !a.eaten);
    }
    done_ = !good_left || steps_ >= config_.max_steps;
    r.done = done_;
    r.observation = observe(done_);
    return r;
}

nlohmann::json SeekAvoidEnv::config() const {
    return {{"env", "seek-avoid"},         {"size", config_.size},           {"n_good", config_.n_good},
            {"n_bad", config_.n_bad},      {"touch_radius", config_.touch_radius},
            {"max_steps", config_.max_steps}, {"rotation", config_.rotation}, {"seed", config_.seed}};
}

// ---- wrappers ----------------------------------------------------------------------------

SequenceWrapper::SequenceWrapper(std::unique_ptr<Environment> base, std::size_t k)
    : base_(std::move(base)), k_(k), n_actions_(1) {
    if (k_ < 1) throw Error("sequence wrapper: k must be >= 1");
    for (std::size_t i = 0; i < k_; ++i) n_actions_ *= base_->num_actions();
}

std::vector<std::size_t> SequenceWrapper::decode(std::size_t action) const {
    check_action(action, n_actions_);
    const std::size_t n = base_->num_actions();
    std::vector<std::size_t> seq(k_);
    for (std::size_t i = k_; i-- > 0;) {
        seq[i] = action % n;
        action /= n;
    }
    return seq;
}

std::string SequenceWrapper::action_name(std::size_t action) const {
    std::vector<std::string> parts;
    for (std::size_t a : decode(action)) parts.push_back(base_->action_name(a));
    return join_ngram(parts);
}

StepResult SequenceWrapper::step(std::size_t action) {
    StepResult total;
    for (std::size_t a : decode(action)) {
        StepResult r = base_->step(a);
        total.reward += r.reward;
        total.observation = std::move(r.observation);
        total.done = r.done;
        if (r.done) break;
    }
    return total;
}

nlohmann::json SequenceWrapper::config() const { return {{"wrapper", "sequence"}, {"k", k_}, {"base", base_->config()}}; }

DuplicatedActionEnv::DuplicatedActionEnv(std::unique_ptr<Environment> base, std::vector<std::size_t> multiplicity)
    : base_(std::move(base)), multiplicity_(std::move(multiplicity)) {
    if (multiplicity_.size() != base_->num_actions()) throw Error("duplicated actions: one multiplicity per base action");
    for (std::size_t a = 0; a < multiplicity_.size(); ++a) {
        if (multiplicity_[a] < 1) throw Error("duplicated actions: multiplicity must be >= 1");
        mapping_.insert(mapping_.end(), multiplicity_[a], a);
    }
}

std::string DuplicatedActionEnv::action_name(std::size_t action) const {
    const std::size_t base = mapping_.at(action);
    std::size_t copy = 0;
    for (std::size_t i = 0; i < action; ++i) copy += mapping_[i] == base ? 1 : 0;
    return base_->action_name(base) + "#" + std::to_string(copy);
}

nlohmann::json DuplicatedActionEnv::config() const {
    return {{"wrapper", "duplicated"}, {"multiplicity", multiplicity_}, {"base", base_->config()}};
}

EmbeddingSource parse_embedding_source(const std::string& name) {
    if (name == "act2vec") return EmbeddingSource::Act2Vec;
    if (name == "act2vec-norm" || name == "act2vec-normalized") return EmbeddingSource::Act2VecNormalized;
    if (name == "one-hot") return EmbeddingSource::OneHot;
    if (name == "random") return EmbeddingSource::Random;
    throw Error("unknown embedding source '" + name + "' (act2vec, act2vec-norm, one-hot, random)");
}

std::string to_string(EmbeddingSource source) {
    switch (source) {
        case EmbeddingSource::Act2Vec: return "act2vec";
        case EmbeddingSource::Act2VecNormalized: return "act2vec-norm";
        case EmbeddingSource::OneHot: return "one-hot";
        case EmbeddingSource::Random: return "random";
    }
    return "?";
}

Matrix embedding_vectors(EmbeddingSource source, std::size_t n_actions, const Matrix* act2vec, std::size_t dim,
                         std::uint64_t seed) {
    switch (source) {
        case EmbeddingSource::OneHot: {
            Matrix m(n_actions, n_actions);
            for (std::size_t a = 0; a < n_actions; ++a) m(a, a) = 1.0;
            return m;
        }
        case EmbeddingSource::Random: {
            if (dim < 1) throw Error("random embeddings: dim must be >= 1");
            Matrix m(n_actions, dim);
            Rng rng(seed);
            for (double& v : m.data()) v = rng.uniform();
            return m;
        }
        case EmbeddingSource::Act2Vec:
        case EmbeddingSource::Act2VecNormalized: {
            if (!act2vec) throw Error("act2vec state source requires an embedding table");
            if (act2vec->rows() != n_actions)
                throw Error("embedding table has " + std::to_string(act2vec->rows()) + " rows for " +
                            std::to_string(n_actions) + " actions");
            Matrix m = *act2vec;
            if (source == EmbeddingSource::Act2VecNormalized)
                for (std::size_t a = 0; a < n_actions; ++a) {
                    const double norm = std::sqrt(dot(m.row(a), m.row(a)));
                    if (norm == 0.0) throw Error("cannot normalize a zero embedding vector");
                    for (double& v : m.row(a)) v /= norm;
                }
            return m;
        }
    }
    throw Error("unknown embedding source");
}

void SumEmbeddingState::add(std::size_t action) {
    const auto row = vectors_.row(action);
    for (std::size_t j = 0; j < sum_.size(); ++j) sum_[j] += row[j];
}

SumEmbeddingEnv::SumEmbeddingEnv(std::unique_ptr<Environment> base, Matrix vectors, double scale)
    : base_(std::move(base)), state_(std::move(vectors)), scale_(scale) {
    if (state_.vectors().rows() != base_->num_actions()) throw Error("sum-embedding state: one vector per action required");
}

Observation SumEmbeddingEnv::observe(bool terminal) const {
    Observation o{state_.value(), terminal};
    for (double& v : o.features) v *= scale_;
    return o;
}

Observation SumEmbeddingEnv::reset() {
    base_->reset();
    state_.reset();
    return observe(false);
}

StepResult SumEmbeddingEnv::step(std::size_t action) {
    StepResult r = base_->step(action);
    state_.add(action);
    r.observation = observe(r.done);
    return r;
}

nlohmann::json SumEmbeddingEnv::config() const {
    return {{"wrapper", "sum-embedding"}, {"dim", state_.vectors().cols()}, {"scale", scale_}, {"base", base_->config()}};
}

}  // namespace act2vec
