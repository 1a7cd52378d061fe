#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "act2vec/corpus.hpp"
#include "act2vec/matrix.hpp"
#include "act2vec/random.hpp"

namespace act2vec {

struct Observation {
    std::vector<double> features;
    bool terminal = false;
};

struct StepResult {
    Observation observation;
    double reward = 0.0;
    bool done = false;
};

class Environment {
public:
    virtual ~Environment() = default;

    virtual std::size_t num_actions() const = 0;
    virtual std::string action_name(std::size_t action) const = 0;
    virtual std::size_t observation_size() const = 0;

    // Starts a new episode. Episode layouts come from the environment's own seeded
    // stream, so the n-th reset after construction is reproducible.
    virtual Observation reset() = 0;
    virtual StepResult step(std::size_t action) = 0;

    virtual nlohmann::json config() const = 0;

    std::vector<std::string> action_names() const;
};

// ---- drawing -----------------------------------------------------------------------------

enum class Dir : std::uint8_t { Left, Right, Up, Down };

// Reward of a traced path of half-unit moves. Sides are maximal runs of one direction,
// merged across the start when the path is closed. Open paths and shapes with other than
// four sides score -0.1; otherwise sum_i min(W, l_i) / (4W) with l_i in stroke units.
double square_reward(const std::vector<Dir>& half_steps, double side_target);

struct SquareConfig {
    std::size_t side = 8;        // W in stroke units
    std::size_t max_steps = 40;
    std::uint64_t seed = 1;
};

// 12 strokes: L, R, U, D advance two half units; corners such as "U+R" move one half
// unit in each direction in order. The episode ends when the pen is back at the origin
// or after max_steps strokes; the reward is paid only then.
class SquareEnv : public Environment {
public:
    explicit SquareEnv(SquareConfig config = {});

    static const std::vector<std::string>& stroke_names();

    std::size_t num_actions() const override { return 12; }
    std::string action_name(std::size_t action) const override;
    std::size_t observation_size() const override { return 3; }
    Observation reset() override;
    StepResult step(std::size_t action) override;
    nlohmann::json config() const override;

    const std::vector<Dir>& trace() const noexcept { return trace_; }
    // Half-step sequence of a stroke.
    static std::vector<Dir> stroke_moves(std::size_t action);

private:
    Observation observe(bool terminal) const;

    SquareConfig config_;
    std::vector<Dir> trace_;
    long x_ = 0;
    long y_ = 0;
    std::size_t steps_ = 0;
    bool done_ = true;
};

// ---- navigation ----------------------------------------------------------------------------

struct Pose {
    double x = 0.0;
    double y = 0.0;
    int heading = 0;  // degrees in [0, 360), counter-clockwise from +x
};

// Occupancy grid with unit cells; cell (i, j) covers [i, i+1) x [j, j+1).
class Grid {
public:
    Grid() = default;
    Grid(std::size_t width, std::size_t height);

    std::size_t width() const noexcept { return width_; }
    std::size_t height() const noexcept { return height_; }
    bool wall(long i, long j) const;  // outside the grid counts as wall
    void set_wall(std::size_t i, std::size_t j, bool value);
    bool blocked(double x, double y) const;

    // 4-connected shortest path of cells from `from` to `to` (inclusive); empty if none.
    std::vector<std::pair<long, long>> shortest_path(std::pair<long, long> from, std::pair<long, long> to) const;
    std::vector<std::pair<long, long>> reachable_cells(std::pair<long, long> from) const;

    // Distance along the ray to the first wall or boundary, capped at max_range.
    double ray_distance(double x, double y, double angle_deg, double max_range) const;

private:
    std::size_t width_ = 0;
    std::size_t height_ = 0;
    std::vector<std::uint8_t> cells_;
};

inline std::pair<long, long> cell_of(double x, double y) {
    return {static_cast<long>(std::floor(x)), static_cast<long>(std::floor(y))};
}

struct Nav2dConfig {
    std::size_t grid = 25;
    std::size_t walls = 300;
    std::size_t goals = 5;
    std::size_t max_steps = 1500;
    double rotation = 25.0;  // degrees, integral
    std::uint64_t seed = 1;
};

constexpr std::size_t kForward = 0;
constexpr std::size_t kRotateLeft = 1;
constexpr std::size_t kRotateRight = 2;

// Shared kinematics of the navigation-style environments: move one unit along the
// heading unless the midpoint or endpoint is blocked, or rotate by a fixed angle.
Pose apply_motion(const Pose& pose, std::size_t action, const Grid& grid, int rotation_deg,
                  double step = 1.0);

// 25x25 grid with random walls and numbered goals to visit in order. Actions F, L, R.
// Observation: pose (x/n, y/n, cos, sin), egocentric vector to the current goal / n and
// 8 wall-ray distances / 8.
class Nav2dEnv : public Environment {
public:
    explicit Nav2dEnv(Nav2dConfig config = {});

    std::size_t num_actions() const override { return 3; }
    std::string action_name(std::size_t action) const override;
    std::size_t observation_size() const override { return 14; }
    Observation reset() override;
    StepResult step(std::size_t action) override;
    nlohmann::json config() const override;

    const Grid& grid() const noexcept { return grid_; }
    const Pose& pose() const noexcept { return pose_; }
    const std::vector<std::pair<long, long>>& goals() const noexcept { return goals_; }
    std::size_t next_goal() const noexcept { return next_goal_; }
    int rotation() const noexcept { return static_cast<int>(config_.rotation); }

    // Installs a fixed layout (for tests); the next step continues from `pose`.
    void set_layout(Grid grid, std::vector<std::pair<long, long>> goals, Pose pose);

private:
    Observation observe(bool terminal) const;

    Nav2dConfig config_;
    Rng rng_;
    Grid grid_;
    std::vector<std::pair<long, long>> goals_;
    std::size_t next_goal_ = 0;
    Pose pose_;
    std::size_t steps_ = 0;
    bool done_ = true;
};

struct SeekAvoidConfig {
    std::size_t size = 10;
    std::size_t n_good = 4;
    std::size_t n_bad = 4;
    double touch_radius = 0.6;
    std::size_t max_steps = 150;
    double rotation = 25.0;
    std::uint64_t seed = 1;
};

struct Apple {
    double x;
    double y;
    bool good;
    bool eaten = false;
};

// Open square arena with good (+1) and bad (-1) apples consumed on contact. Same action
// semantics as Nav2dEnv. Observation: pose (4); for the nearest good and then the nearest
// bad apple, the egocentric unit bearing, distance / size and a presence flag (4 each);
// 8 boundary-ray distances / size.
class SeekAvoidEnv : public Environment {
public:
    explicit SeekAvoidEnv(SeekAvoidConfig config = {});

    std::size_t num_actions() const override { return 3; }
    std::string action_name(std::size_t action) const override;
    std::size_t observation_size() const override { return 20; }
    Observation reset() override;
    StepResult step(std::size_t action) override;
    nlohmann::json config() const override;

    const Pose& pose() const noexcept { return pose_; }
    const std::vector<Apple>& apples() const noexcept { return apples_; }
    int rotation() const noexcept { return static_cast<int>(config_.rotation); }
    void set_layout(std::vector<Apple> apples, Pose pose);

private:
    Observation observe(bool terminal) const;

    SeekAvoidConfig config_;
    Rng rng_;
    Grid arena_;
    std::vector<Apple> apples_;
    Pose pose_;
    std::size_t steps_ = 0;
    bool done_ = true;
};

// ---- wrappers ----------------------------------------------------------------------------

// Actions of A^k, enumerated lexicographically over base ids; names joined with '+'.
class SequenceWrapper : public Environment {
public:
    SequenceWrapper(std::unique_ptr<Environment> base, std::size_t k);

    std::size_t num_actions() const override { return n_actions_; }
    std::string action_name(std::size_t action) const override;
    std::size_t observation_size() const override { return base_->observation_size(); }
    Observation reset() override { return base_->reset(); }
    StepResult step(std::size_t action) override;
    nlohmann::json config() const override;

    std::vector<std::size_t> decode(std::size_t action) const;
    Environment& base() { return *base_; }

private:
    std::unique_ptr<Environment> base_;
    std::size_t k_;
    std::size_t n_actions_;
};

// Replicates each base action into several interchangeable copies named "<name>#<i>".
class DuplicatedActionEnv : public Environment {
public:
    DuplicatedActionEnv(std::unique_ptr<Environment> base, std::vector<std::size_t> multiplicity);

    std::size_t num_actions() const override { return mapping_.size(); }
    std::string action_name(std::size_t action) const override;
    std::size_t observation_size() const override { return base_->observation_size(); }
    Observation reset() override { return base_->reset(); }
    StepResult step(std::size_t action) override { return base_->step(mapping_.at(action)); }
    nlohmann::json config() const override;

    std::size_t base_action(std::size_t action) const { return mapping_.at(action); }
    const std::vector<std::size_t>& mapping() const noexcept { return mapping_; }

private:
    std::unique_ptr<Environment> base_;
    std::vector<std::size_t> multiplicity_;
    std::vector<std::size_t> mapping_;
};

enum class EmbeddingSource { Act2Vec, Act2VecNormalized, OneHot, Random };

EmbeddingSource parse_embedding_source(const std::string& name);
std::string to_string(EmbeddingSource source);

// Per-action vectors for the sum-of-embeddings state. `act2vec` rows are indexed by the
// environment's action ids and required for the Act2Vec sources; Random draws U[0,1]^dim.
Matrix embedding_vectors(EmbeddingSource source, std::size_t n_actions, const Matrix* act2vec,
                         std::size_t dim, std::uint64_t seed);

// Running sum of the vectors of the actions taken since reset.
class SumEmbeddingState {
public:
    explicit SumEmbeddingState(Matrix vectors) : vectors_(std::move(vectors)), sum_(vectors_.cols(), 0.0) {}

    void reset() { std::fill(sum_.begin(), sum_.end(), 0.0); }
    void add(std::size_t action);
    const std::vector<double>& value() const noexcept { return sum_; }
    const Matrix& vectors() const noexcept { return vectors_; }

private:
    Matrix vectors_;
    std::vector<double> sum_;
};

// Replaces the base observation by the sum-of-embeddings state (times `scale`).
class SumEmbeddingEnv : public Environment {
public:
    SumEmbeddingEnv(std::unique_ptr<Environment> base, Matrix vectors, double scale = 1.0);

    std::size_t num_actions() const override { return base_->num_actions(); }
    std::string action_name(std::size_t action) const override { return base_->action_name(action); }
    std::size_t observation_size() const override { return state_.vectors().cols(); }
    Observation reset() override;
    StepResult step(std::size_t action) override;
    nlohmann::json config() const override;

private:
    Observation observe(bool terminal) const;

    std::unique_ptr<Environment> base_;
    SumEmbeddingState state_;
    double scale_;
};

// ---- demonstrators ---------------------------------------------------------------------

class Demonstrator {
public:
    virtual ~Demonstrator() = default;
    virtual void begin_episode(const Environment& env, Rng& rng) = 0;
    // Next action, or nullopt when the demonstrator has finished the episode.
    virtual std::optional<std::size_t> act(const Environment& env, Rng& rng) = 0;
};

// Turn toward `target_heading` (degrees) by the shorter direction; exact 180 turns left.
std::size_t rotate_toward(int heading, double target_heading);
// Signed smallest angle a - b in (-180, 180].
double angle_difference(double a, double b);

// Greedy waypoint follower for Nav2dEnv: BFS path to the current goal, rotate toward the
// centre of the next cell and move once the heading error is below half a rotation step.
// With probability `noise` a uniformly random action is emitted instead.
class ScriptedNavigator : public Demonstrator {
public:
    explicit ScriptedNavigator(double noise = 0.0) : noise_(noise) {}
    void begin_episode(const Environment& env, Rng& rng) override;
    std::optional<std::size_t> act(const Environment& env, Rng& rng) override;

private:
    std::size_t steer(const Pose& pose, double tx, double ty, const Grid& grid, int rotation);

    double noise_;
    std::optional<int> detour_heading_;
};

// Heads for the nearest uneaten good apple, ignoring bad ones.
class SeekAvoidNavigator : public Demonstrator {
public:
    explicit SeekAvoidNavigator(double noise = 0.0) : noise_(noise) {}
    void begin_episode(const Environment&, Rng&) override {}
    std::optional<std::size_t> act(const Environment& env, Rng& rng) override;

private:
    double noise_;
};

// Plans one rectangle per episode for SquareEnv: random orientation, starting side and
// side lengths near W, with occasional stroke substitutions.
class SquareDemonstrator : public Demonstrator {
public:
    SquareDemonstrator(std::size_t side, std::size_t jitter = 2, double imperfection = 0.05)
        : side_(side), jitter_(jitter), imperfection_(imperfection) {}
    void begin_episode(const Environment& env, Rng& rng) override;
    std::optional<std::size_t> act(const Environment& env, Rng& rng) override;

    // The perfect clockwise-from-Up square of side W as stroke ids.
    static std::vector<std::size_t> perfect_square(std::size_t side);

private:
    std::size_t side_;
    std::size_t jitter_;
    double imperfection_;
    std::vector<std::size_t> plan_;
    std::size_t cursor_ = 0;
};

// Runs demonstrator episodes until at least `n_actions` actions are logged; one
// trajectory per episode, tokens are the environment's action names.
Corpus gen_demo_corpus(Environment& env, Demonstrator& demo, std::size_t n_actions, std::uint64_t seed);

}  // namespace act2vec
