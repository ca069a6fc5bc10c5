#pragma once

#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace zfdt {

struct GenerationParams {
    double temperature = 0.0;
    std::int64_t seed = 0;
    int max_output_tokens = 1024;
};

class Encoder {
public:
    virtual ~Encoder() = default;
    virtual std::string name() const = 0;
    virtual std::size_t dimension() const = 0;

    /// Throws InvalidInput when `text` is blank.
    std::vector<double> encode(std::string_view text) const;

protected:
    virtual std::vector<double> encode_impl(std::string_view text) const = 0;
};

class Generator {
public:
    virtual ~Generator() = default;
    virtual std::string name() const = 0;
    virtual int max_output_tokens() const { return 1024; }
    virtual double temperature() const { return 0.0; }

    /// Throws InvalidInput for an empty prompt and ClientError if the
    /// implementation produced no text.
    std::string generate(std::string_view prompt, const GenerationParams& params = {}) const;

protected:
    virtual std::string generate_impl(std::string_view prompt, const GenerationParams& params) const = 0;
};

// ---------------------------------------------------------------------------
// Prompt layout
//
// Line 1 is a role tag such as "[[EXTRACT]]". The rest is a sequence of
// sections, each opened by a line "<<name args>>" and running to the next
// section line.

enum class PromptRole { extract, summarize, map, reduce, expand, answer, pair, judge };

std::string_view prompt_role_tag(PromptRole role);

struct PromptSection {
    std::string name;
    std::string args;
    std::string body;
};

class PromptBuilder {
public:
    explicit PromptBuilder(PromptRole role);
    PromptBuilder& section(std::string_view name, std::string_view body);
    PromptBuilder& section(std::string_view name, std::string_view args, std::string_view body);
    std::string str() const { return out_; }

private:
    std::string out_;
};

struct ParsedPrompt {
    std::optional<PromptRole> role;
    std::vector<PromptSection> sections;

    /// Body of the first section with this name, or empty.
    std::string get(std::string_view name) const;
    std::vector<const PromptSection*> all(std::string_view name) const;
};

ParsedPrompt parse_prompt(std::string_view prompt);

// ---------------------------------------------------------------------------
// Deterministic local clients

class StubEncoder final : public Encoder {
public:
    explicit StubEncoder(std::size_t dimension = 512, std::uint64_t seed = 0);
    std::string name() const override;
    std::size_t dimension() const override { return dimension_; }

protected:
    std::vector<double> encode_impl(std::string_view text) const override;

private:
    std::size_t dimension_;
    std::uint64_t seed_;
};

struct StubOptions {
    /// PAIR prompts return the same text for both candidates.
    bool identical_pairs = false;
    /// Cap on items listed per answer section.
    std::size_t max_section_items = 12;
};

class StubGenerator final : public Generator {
public:
    explicit StubGenerator(StubOptions options = {});
    std::string name() const override { return "stub-generator"; }

protected:
    std::string generate_impl(std::string_view prompt, const GenerationParams& params) const override;

private:
    StubOptions options_;
};

/// Marker that separates the two candidates of a PAIR response.
inline constexpr std::string_view kCandidateMarker = "=== CANDIDATE";

struct ScoredPair {
    std::string text_w;
    std::string text_l;
    double score_w = 0.0;
    double score_l = 0.0;
};

/// Sends a PAIR prompt and orders the two returned candidates by score.
/// Throws DegeneratePair when the candidates are identical and ClientError
/// when the response does not contain two scored candidates.
ScoredPair generate_scored_pair(const Generator& generator, std::string_view prompt,
                                const GenerationParams& params = {});

/// Parses "=== CANDIDATE i SCORE=s" blocks out of a PAIR response.
std::vector<std::pair<double, std::string>> parse_candidates(std::string_view response);

// ---------------------------------------------------------------------------
// Remote clients (chat-completions / embeddings over HTTP)

struct RemoteConfig {
    std::string base_url;  // e.g. "http://127.0.0.1:8080/v1"
    std::string model;
    std::string embedding_model;
    std::string api_key_env;  // name of the environment variable holding the token
    std::size_t dimension = 0;
    int max_in_flight = 4;
    int attempts = 3;
    int backoff_ms = 250;
    int timeout_s = 60;
    int max_output_tokens = 1024;
    double temperature = 0.0;
};

class InFlightLimiter {
public:
    explicit InFlightLimiter(int capacity);
    void acquire();
    void release();
    int capacity() const { return capacity_; }
    int peak() const;

private:
    int capacity_;
    int in_use_ = 0;
    int peak_ = 0;
    mutable std::mutex mu_;
    std::condition_variable cv_;
};

class RemoteTransport;

class RemoteGenerator final : public Generator {
public:
    explicit RemoteGenerator(RemoteConfig config);
    ~RemoteGenerator() override;
    std::string name() const override { return config_.model; }
    int max_output_tokens() const override { return config_.max_output_tokens; }
    double temperature() const override { return config_.temperature; }
    int peak_in_flight() const;

protected:
    std::string generate_impl(std::string_view prompt, const GenerationParams& params) const override;

private:
    RemoteConfig config_;
    std::unique_ptr<RemoteTransport> transport_;
};

class RemoteEncoder final : public Encoder {
public:
    explicit RemoteEncoder(RemoteConfig config);
    ~RemoteEncoder() override;
    std::string name() const override { return config_.embedding_model; }
    std::size_t dimension() const override { return config_.dimension; }

protected:
    std::vector<double> encode_impl(std::string_view text) const override;

private:
    RemoteConfig config_;
    std::unique_ptr<RemoteTransport> transport_;
};

}  // namespace zfdt
