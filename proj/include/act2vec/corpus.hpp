#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <vector>

namespace act2vec {

// One demonstration episode. `states`, when present, is parallel to `actions`.
struct Trajectory {
    std::string id;
    std::vector<std::string> actions;
    std::optional<std::vector<std::string>> states;

    bool operator==(const Trajectory&) const = default;
};

struct Corpus {
    std::vector<Trajectory> trajectories;

    std::size_t action_count() const;
    bool operator==(const Corpus&) const = default;
};

// Reads JSON-lines: one object per line with "actions" (array of strings) and optional
// "id" and "states". Blank lines are ignored. Throws ParseError naming the line.
Corpus parse_corpus(std::istream& in);
Corpus read_corpus_file(const std::string& path);
void write_corpus(std::ostream& out, const Corpus& corpus);
void write_corpus_file(const std::string& path, const Corpus& corpus);

// Bijection token <-> id. Ids are assigned by descending count, ties lexicographic.
class ActionVocabulary {
public:
    ActionVocabulary() = default;

    // Tokens in id order with their counts; throws on duplicates.
    ActionVocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts);

    std::size_t size() const noexcept { return tokens_.size(); }
    bool empty() const noexcept { return tokens_.empty(); }

    const std::string& token(std::size_t id) const { return tokens_.at(id); }
    std::uint64_t count(std::size_t id) const { return counts_.at(id); }
    const std::vector<std::string>& tokens() const noexcept { return tokens_; }
    const std::vector<std::uint64_t>& counts() const noexcept { return counts_; }

    std::optional<std::size_t> find(const std::string& token) const;
    std::size_t id_of(const std::string& token) const;  // throws Error if absent

    bool operator==(const ActionVocabulary& o) const {
        return tokens_ == o.tokens_ && counts_ == o.counts_;
    }

private:
    std::vector<std::string> tokens_;
    std::vector<std::uint64_t> counts_;
    std::unordered_map<std::string, std::size_t> index_;
};

ActionVocabulary build_vocabulary(const Corpus& corpus, std::uint64_t min_count = 1);

// `<token> <count>` per line, in id order.
void write_vocabulary(std::ostream& out, const ActionVocabulary& vocab);
ActionVocabulary read_vocabulary(std::istream& in);

struct NgramCorpus {
    Corpus corpus;
    std::size_t dropped = 0;  // trajectories shorter than k
};

inline constexpr char kNgramSeparator = '+';

std::string join_ngram(std::span<const std::string> parts);

// Replaces every trajectory by its k-gram tokens; windows advance by `stride` (1 or k).
// k == 1 returns the corpus unchanged. States are dropped for k > 1.
NgramCorpus compose_ngrams(const Corpus& corpus, std::size_t k, std::size_t stride);

struct ContextPair {
    std::uint32_t center;
    std::uint32_t context;

    bool operator==(const ContextPair&) const = default;
};

// Trajectories as vocabulary ids; -1 marks out-of-vocabulary positions.
using EncodedCorpus = std::vector<std::vector<std::int32_t>>;

EncodedCorpus encode_corpus(const Corpus& corpus, const ActionVocabulary& vocab);

// Calls `fn(center, context)` for every action-only context pair with symmetric window
// `window`. Windows never cross trajectory boundaries. Returns the number of pairs
// skipped because one side was out of vocabulary.
template <typename Fn>
std::size_t for_each_context_pair(const EncodedCorpus& encoded, std::size_t window, Fn&& fn) {
    std::size_t skipped = 0;
    for (const auto& seq : encoded) {
        const std::size_t n = seq.size();
        for (std::size_t t = 0; t < n; ++t) {
            const std::size_t lo = t >= window ? t - window : 0;
            const std::size_t hi = std::min(n - 1, t + window);
            for (std::size_t j = lo; j <= hi; ++j) {
                if (j == t) continue;
                if (seq[t] < 0 || seq[j] < 0) {
                    ++skipped;
                    continue;
                }
                fn(static_cast<std::uint32_t>(seq[t]), static_cast<std::uint32_t>(seq[j]));
            }
        }
    }
    return skipped;
}

struct ContextPairs {
    std::vector<ContextPair> pairs;
    std::size_t skipped = 0;
};

ContextPairs extract_context_pairs(const Corpus& corpus, const ActionVocabulary& vocab,
                                   std::size_t window);

// Negative-sampling distribution P_C over context ids, proportional to count^exponent.
// Contexts never observed get probability zero.
class ContextDistribution {
public:
    ContextDistribution() = default;
    ContextDistribution(std::span<const std::uint64_t> context_counts, double smoothing_exponent);

    const std::vector<double>& probabilities() const noexcept { return probs_; }
    double probability(std::size_t id) const { return probs_.at(id); }
    std::size_t size() const noexcept { return probs_.size(); }

    // Inverse-CDF draw from a uniform u in [0, 1).
    std::size_t sample(double u) const;

private:
    std::vector<double> probs_;
    std::vector<double> cumulative_;
};

ContextDistribution context_distribution(std::span<const ContextPair> pairs,
                                         const ActionVocabulary& vocab, double smoothing_exponent);

}  // namespace act2vec
