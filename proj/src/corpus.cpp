#include "act2vec/corpus.hpp"

#include <cmath>
#include <fstream>
#include <istream>
#include <map>
#include <ostream>
#include <sstream>

#include <json.hpp>

#include "act2vec/error.hpp"

namespace act2vec {

using nlohmann::json;

std::size_t Corpus::action_count() const {
    std::size_t n = 0;
    for (const auto& t : trajectories) n += t.actions.size();
    return n;
}

namespace {

std::vector<std::string> string_array(const json& value, const char* key, std::size_t line) {
    if (!value.is_array()) throw ParseError(std::string("\"") + key + "\" must be an array", line);
    std::vector<std::string> out;
    out.reserve(value.size());
    for (const auto& item : value) {
        if (!item.is_string())
            throw ParseError(std::string("\"") + key + "\" must contain only strings", line);
        out.push_back(item.get<std::string>());
    }
    return out;
}

}  // namespace

Corpus parse_corpus(std::istream& in) {
    Corpus corpus;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.find_first_not_of(" \t\r") == std::string::npos) continue;

        json obj;
        try {
            obj = json::parse(text);
        } catch (const json::parse_error& e) {
            throw ParseError(std::string("malformed JSON: ") + e.what(), line);
        }
        if (!obj.is_object()) throw ParseError("expected a JSON object", line);
        if (!obj.contains("actions")) throw ParseError("missing \"actions\"", line);

        Trajectory traj;
        traj.actions = string_array(obj["actions"], "actions", line);
        if (traj.actions.empty()) throw ParseError("empty \"actions\" array", line);

        if (auto it = obj.find("id"); it != obj.end()) {
            if (it->is_string())
                traj.id = it->get<std::string>();
            else if (it->is_number_integer())
                traj.id = std::to_string(it->get<long long>());
            else
                throw ParseError("\"id\" must be a string or integer", line);
        } else {
            traj.id = std::to_string(corpus.trajectories.size());
        }

        if (auto it = obj.find("states"); it != obj.end() && !it->is_null()) {
            traj.states = string_array(*it, "states", line);
            if (traj.states->size() != traj.actions.size())
                throw ParseError("\"states\" length differs from \"actions\" length", line);
        }
        corpus.trajectories.push_back(std::move(traj));
    }
    if (corpus.trajectories.empty()) throw ParseError("empty corpus", 0);
    return corpus;
}

Corpus read_corpus_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open corpus file: " + path);
    return parse_corpus(in);
}

void write_corpus(std::ostream& out, const Corpus& corpus) {
    for (const auto& t : corpus.trajectories) {
        json obj;
        obj["id"] = t.id;
        obj["actions"] = t.actions;
        if (t.states) obj["states"] = *t.states;
        out << obj.dump() << '\n';
    }
}

void write_corpus_file(const std::string& path, const Corpus& corpus) {
    std::ofstream out(path);
    if (!out) throw Error("cannot write corpus file: " + path);
    write_corpus(out, corpus);
}

ActionVocabulary::ActionVocabulary(std::vector<std::string> tokens, std::vector<std::uint64_t> counts)
    : tokens_(std::move(tokens)), counts_(std::move(counts)) {
    if (tokens_.size() != counts_.size()) throw Error("vocabulary: token/count size mismatch");
    index_.reserve(tokens_.size());
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
        if (!index_.emplace(tokens_[i], i).second)
            throw Error("vocabulary: duplicate token '" + tokens_[i] + "'");
    }
}

std::optional<std::size_t> ActionVocabulary::find(const std::string& token) const {
    auto it = index_.find(token);
    if (it == index_.end()) return std::nullopt;
    return it->second;
}

std::size_t ActionVocabulary::id_of(const std::string& token) const {
    auto id = find(token);
    if (!id) throw Error("token not in vocabulary: '" + token + "'");
    return *id;
}

ActionVocabulary build_vocabulary(const Corpus& corpus, std::uint64_t min_count) {
    if (min_count < 1) throw Error("min_count must be >= 1");
    std::map<std::string, std::uint64_t> counts;
    for (const auto& t : corpus.trajectories)
        for (const auto& a : t.actions) ++counts[a];

    std::vector<std::pair<std::string, std::uint64_t>> kept;
    for (auto& [tok, n] : counts)
        if (n >= min_count) kept.emplace_back(tok, n);
    if (kept.empty()) throw Error("empty vocabulary");

    // std::map iteration is already lexicographic, so a stable sort by count suffices.
    std::stable_sort(kept.begin(), kept.end(),
                     [](const auto& a, const auto& b) { return a.second > b.second; });

    std::vector<std::string> tokens;
    std::vector<std::uint64_t> cs;
    for (auto& [tok, n] : kept) {
        tokens.push_back(tok);
        cs.push_back(n);
    }
    return ActionVocabulary(std::move(tokens), std::move(cs));
}

void write_vocabulary(std::ostream& out, const ActionVocabulary& vocab) {
    for (std::size_t i = 0; i < vocab.size(); ++i) out << vocab.token(i) << ' ' << vocab.count(i) << '\n';
}

ActionVocabulary read_vocabulary(std::istream& in) {
    std::vector<std::string> tokens;
    std::vector<std::uint64_t> counts;
    std::string text;
    std::size_t line = 0;
    while (std::getline(in, text)) {
        ++line;
        if (text.empty()) continue;
        std::istringstream ss(text);
        std::string tok;
        std::uint64_t n = 0;
        if (!(ss >> tok >> n)) throw ParseError("expected '<token> <count>'", line);
        tokens.push_back(tok);
        counts.push_back(n);
    }
    if (tokens.empty()) throw Error("empty vocabulary");
    return ActionVocabulary(std::move(tokens), std::move(counts));
}

std::string join_ngram(std::span<const std::string> parts) {
    std::string out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
        if (i) out += kNgramSeparator;
        out += parts[i];
    }
    return out;
}

NgramCorpus compose_ngrams(const Corpus& corpus, std::size_t k, std::size_t stride) {
    if (k < 1) throw Error("n-gram length k must be >= 1");
    if (stride != 1 && stride != k) throw Error("n-gram stride must be 1 or k");
    NgramCorpus result;
    if (k == 1) {
        result.corpus = corpus;
        return result;
    }
    for (const auto& t : corpus.trajectories) {
        if (t.actions.size() < k) {
            ++result.dropped;
            continue;
        }
        Trajectory out;
        out.id = t.id;
        const std::span<const std::string> acts(t.actions);
        for (std::size_t start = 0; start + k <= acts.size(); start += stride)
            out.actions.push_back(join_ngram(acts.subspan(start, k)));
        result.corpus.trajectories.push_back(std::move(out));
    }
    return result;
}

EncodedCorpus encode_corpus(const Corpus& corpus, const ActionVocabulary& vocab) {
    EncodedCorpus encoded;
    encoded.reserve(corpus.trajectories.size());
    for (const auto& t : corpus.trajectories) {
        std::vector<std::int32_t> ids;
        ids.reserve(t.actions.size());
        for (const auto& a : t.actions) {
            auto id = vocab.find(a);
            ids.push_back(id ? static_cast<std::int32_t>(*id) : -1);
        }
        encoded.push_back(std::move(ids));
    }
    return encoded;
}

ContextPairs extract_context_pairs(const Corpus& corpus, const ActionVocabulary& vocab,
                                   std::size_t window) {
    if (window < 1) throw Error("context window must be >= 1");
    ContextPairs out;
    out.skipped = for_each_context_pair(encode_corpus(corpus, vocab), window,
                                        [&](std::uint32_t a, std::uint32_t c) {
                                            out.pairs.push_back({a, c});
                                        });
    return out;
}

ContextDistribution::ContextDistribution(std::span<const std::uint64_t> context_counts,
                                         double smoothing_exponent)
    : probs_(context_counts.size(), 0.0), cumulative_(context_counts.size(), 0.0) {
    double total = 0.0;
    for (std::size_t i = 0; i < context_counts.size(); ++i) {
        if (context_counts[i] == 0) continue;
        probs_[i] = std::pow(static_cast<double>(context_counts[i]), smoothing_exponent);
        total += probs_[i];
    }
    if (total <= 0.0) throw Error("context distribution: no observed contexts");
    double acc = 0.0;
    for (std::size_t i = 0; i < probs_.size(); ++i) {
        probs_[i] /= total;
        acc += probs_[i];
        cumulative_[i] = acc;
    }
}

std::size_t ContextDistribution::sample(double u) const {
    const double target = u * cumulative_.back();
    auto it = std::upper_bound(cumulative_.begin(), cumulative_.end(), target);
    std::size_t id = it == cumulative_.end() ? cumulative_.size() - 1
                                             : static_cast<std::size_t>(it - cumulative_.begin());
    // Skip zero-probability slots that share a cumulative value with their predecessor.
    while (probs_[id] == 0.0 && id + 1 < probs_.size()) ++id;
    while (probs_[id] == 0.0 && id > 0) --id;
    return id;
}

ContextDistribution context_distribution(std::span<const ContextPair> pairs,
                                         const ActionVocabulary& vocab, double smoothing_exponent) {
    if (pairs.empty()) throw Error("context distribution needs at least one pair");
    std::vector<std::uint64_t> counts(vocab.size(), 0);
    for (const auto& p : pairs) ++counts.at(p.context);
    return ContextDistribution(counts, smoothing_exponent);
}

}  // namespace act2vec
