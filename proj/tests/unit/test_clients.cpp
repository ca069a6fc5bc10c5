#include <doctest.h>
#include <httplib.h>

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <json.hpp>
#include <thread>

#include "zfdt/clients.hpp"
#include "zfdt/errors.hpp"

using namespace zfdt;
using json = nlohmann::json;

namespace {

double norm(const std::vector<double>& v) {
    double s = 0.0;
    for (double x : v) s += x * x;
    return std::sqrt(s);
}

double cosine(const std::vector<double>& a, const std::vector<double>& b) {
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
    return s / (norm(a) * norm(b));
}

// Local endpoint standing in for a chat-completions / embeddings service.
struct MockEndpoint {
    httplib::Server server;
    int port = 0;
    std::thread thread;

    MockEndpoint() = default;
    void start() {
        port = server.bind_to_any_port("127.0.0.1");
        thread = std::thread([this] { server.listen_after_bind(); });
        server.wait_until_ready();
    }
    ~MockEndpoint() {
        server.stop();
        if (thread.joinable()) thread.join();
    }
    std::string url() const { return "http://127.0.0.1:" + std::to_string(port) + "/v1"; }
};

}  // namespace

TEST_CASE("stub encoder returns unit vectors of the configured dimension") {
    StubEncoder enc(8);
    const auto a = enc.encode("a");
    const auto b = enc.encode("a");
    REQUIRE(a.size() == 8);
    CHECK(std::abs(norm(a) - 1.0) < 1e-9);
    CHECK(a == b);
    CHECK_THROWS_AS(enc.encode(""), InvalidInput);
    CHECK_THROWS_AS(enc.encode("  \n"), InvalidInput);
    CHECK(StubEncoder().name() == "stub-ngram3-d512-s0");
    CHECK(StubEncoder(64, 7).name() == "stub-ngram3-d64-s7");
}

TEST_CASE("stub encoder similarity regression values") {
    StubEncoder enc;
    // 3-gram disjoint pair
    CHECK(cosine(enc.encode("abcdef"), enc.encode("uvwxyz")) < 0.99);
    CHECK(cosine(enc.encode("abcdef"), enc.encode("uvwxyz")) == doctest::Approx(0.0).epsilon(1e-12));
    // overlapping pair: 9 shared of 11 and 14 grams
    const double overlap = cosine(enc.encode("chronic cough"), enc.encode("chronic diarrhea"));
    CHECK(overlap > 0.3);
    CHECK(overlap < 0.99);
    CHECK(cosine(enc.encode("chronic cough"), enc.encode("chronic cough")) == doctest::Approx(1.0));
}

TEST_CASE("different seeds give different stub embeddings") {
    CHECK(StubEncoder(512, 0).encode("licorice") != StubEncoder(512, 1).encode("licorice"));
}

TEST_CASE("stub generator is a pure function of prompt and seed") {
    StubGenerator gen;
    const std::string p = PromptBuilder(PromptRole::expand).section("symptoms", "dry cough").str();
    CHECK(gen.generate(p) == gen.generate(p));
    CHECK_THROWS_AS(gen.generate(""), InvalidInput);
}

TEST_CASE("stub extraction on a single verb sentence") {
    StubGenerator gen;
    const std::string out = gen.generate(PromptBuilder(PromptRole::extract)
                                             .section("text", "Halloysite treats intestinal wind bleeding")
                                             .str());
    CHECK(out.find("ENTITY\tHalloysite\therbal_ingredient") != std::string::npos);
    CHECK(out.find("ENTITY\tintestinal wind bleeding\tdisease") != std::string::npos);
    CHECK(out.find("RELATION\tHalloysite\ttreats\tintestinal wind bleeding") != std::string::npos);
}

TEST_CASE("stub reduce concatenates local answers") {
    StubGenerator gen;
    const std::string p = PromptBuilder(PromptRole::reduce)
                              .section("answer", "9 disease", "[Disease] cough")
                              .section("answer", "12 preparation", "[Preparation Methods] decoct")
                              .str();
    const std::string out = gen.generate(p);
    const auto a = out.find("[Disease] cough");
    const auto b = out.find("[Preparation Methods] decoct");
    REQUIRE(a != std::string::npos);
    REQUIRE(b != std::string::npos);
    CHECK(a < b);
}

TEST_CASE("prompt builder output parses back") {
    const std::string p = PromptBuilder(PromptRole::map).section("query", "x").section("summary", "a=1", "body\ntext").str();
    const ParsedPrompt parsed = parse_prompt(p);
    REQUIRE(parsed.role.has_value());
    CHECK(*parsed.role == PromptRole::map);
    CHECK(parsed.get("query") == "x");
    REQUIRE(parsed.all("summary").size() == 1);
    CHECK(parsed.all("summary")[0]->args == "a=1");
    CHECK(parsed.all("summary")[0]->body == "body\ntext");
}

TEST_CASE("scored pair from the stub orders the more complete answer first") {
    StubGenerator gen;
    const std::string p = PromptBuilder(PromptRole::pair)
                              .section("symptoms", "dry cough")
                              .section("retrieved", "[Disease] lung dryness\n[Recommended Formula] lily bulb decoction")
                              .str();
    const ScoredPair pair = generate_scored_pair(gen, p);
    CHECK(pair.score_w >= pair.score_l);
    CHECK(pair.text_w != pair.text_l);
    CHECK(pair.text_w.size() > pair.text_l.size());

    StubGenerator same(StubOptions{true, 12});
    CHECK_THROWS_AS(generate_scored_pair(same, p), DegeneratePair);
}

TEST_CASE("candidate parsing") {
    const auto c = parse_candidates("=== CANDIDATE 1 SCORE=0.4\nshort\n=== CANDIDATE 2 SCORE=0.9\nlonger text\n");
    REQUIRE(c.size() == 2);
    CHECK(c[0].first == doctest::Approx(0.4));
    CHECK(c[1].second == "longer text");
}

TEST_CASE("unreachable endpoint fails after the configured attempts") {
    RemoteConfig cfg;
    cfg.base_url = "http://127.0.0.1:1/v1";
    cfg.model = "m";
    cfg.attempts = 3;
    cfg.backoff_ms = 1;
    cfg.timeout_s = 2;
    RemoteGenerator gen(cfg);
    try {
        gen.generate("hello");
        FAIL("expected ClientError");
    } catch (const ClientError& e) {
        CHECK(e.attempts() == 3);
    }
}

TEST_CASE("remote generator speaks the chat-completions shape") {
    MockEndpoint ep;
    json seen;
    std::string auth;
    ep.server.Post("/v1/chat/completions", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        auth = req.get_header_value("Authorization");
        res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"a paraphrase"}}]})", "application/json");
    });
    ep.start();
    ::setenv("ZFDT_TEST_KEY", "sekrit", 1);
    RemoteConfig cfg;
    cfg.base_url = ep.url();
    cfg.model = "chat-model";
    cfg.api_key_env = "ZFDT_TEST_KEY";
    RemoteGenerator gen(cfg);
    GenerationParams params;
    params.temperature = 0.3;
    params.max_output_tokens = 77;
    CHECK(gen.generate("expand this", params) == "a paraphrase");
    CHECK(seen["model"] == "chat-model");
    CHECK(seen["messages"][0]["role"] == "user");
    CHECK(seen["messages"][0]["content"] == "expand this");
    CHECK(seen["temperature"].get<double>() == doctest::Approx(0.3));
    CHECK(seen["max_tokens"] == 77);
    CHECK(auth == "Bearer sekrit");
}

TEST_CASE("remote scored pair follows the returned scores") {
    MockEndpoint ep;
    ep.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        const std::string content = "=== CANDIDATE 1 SCORE=2\nbrief answer\n=== CANDIDATE 2 SCORE=5\nfull answer\n";
        res.set_content(json{{"choices", {{{"message", {{"content", content}}}}}}}.dump(), "application/json");
    });
    ep.start();
    RemoteConfig cfg;
    cfg.base_url = ep.url();
    cfg.model = "m";
    RemoteGenerator gen(cfg);
    const ScoredPair p = generate_scored_pair(gen, PromptBuilder(PromptRole::pair).section("symptoms", "x").str());
    CHECK(p.text_w == "full answer");
    CHECK(p.text_l == "brief answer");
    CHECK(p.score_w == doctest::Approx(5.0));
}

TEST_CASE("rate limiting surfaces as RetryableError and empty text as ClientError") {
    MockEndpoint ep;
    std::atomic<int> calls{0};
    ep.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        ++calls;
        res.status = 429;
    });
    ep.server.Post("/v2/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        res.set_content(R"({"choices":[{"message":{"content":""}}]})", "application/json");
    });
    ep.start();
    RemoteConfig cfg;
    cfg.base_url = ep.url();
    cfg.model = "m";
    cfg.backoff_ms = 1;
    RemoteGenerator gen(cfg);
    CHECK_THROWS_AS(gen.generate("x"), RetryableError);
    CHECK(calls.load() == 3);

    cfg.base_url = "http://127.0.0.1:" + std::to_string(ep.port) + "/v2";
    RemoteGenerator empty(cfg);
    CHECK_THROWS_AS(empty.generate("x"), ClientError);
}

TEST_CASE("remote encoder checks the returned dimension") {
    MockEndpoint ep;
    json seen;
    ep.server.Post("/v1/embeddings", [&](const httplib::Request& req, httplib::Response& res) {
        seen = json::parse(req.body);
        res.set_content(R"({"data":[{"embedding":[0.6,0.8,0.0]}]})", "application/json");
    });
    ep.start();
    RemoteConfig cfg;
    cfg.base_url = ep.url();
    cfg.embedding_model = "embed";
    cfg.dimension = 3;
    RemoteEncoder enc(cfg);
    const auto v = enc.encode("text");
    REQUIRE(v.size() == 3);
    CHECK(v[1] == doctest::Approx(0.8));
    CHECK(seen["model"] == "embed");
    CHECK(seen["input"] == "text");

    cfg.dimension = 4;
    RemoteEncoder wrong(cfg);
    CHECK_THROWS_AS(wrong.encode("text"), DimensionError);
    cfg.dimension = 0;
    CHECK_THROWS_AS(RemoteEncoder{cfg}, ConfigError);
}

TEST_CASE("in-flight limiter never exceeds its capacity") {
    MockEndpoint ep;
    ep.server.new_task_queue = [] { return new httplib::ThreadPool(8); };
    ep.server.Post("/v1/chat/completions", [&](const httplib::Request&, httplib::Response& res) {
        std::this_thread::sleep_for(std::chrono::milliseconds(20));
        res.set_content(R"({"choices":[{"message":{"content":"ok"}}]})", "application/json");
    });
    ep.start();
    RemoteConfig cfg;
    cfg.base_url = ep.url();
    cfg.model = "m";
    cfg.max_in_flight = 2;
    RemoteGenerator gen(cfg);
    std::vector<std::thread> workers;
    for (int i = 0; i < 6; ++i) workers.emplace_back([&] { gen.generate("x"); });
    for (auto& t : workers) t.join();
    CHECK(gen.peak_in_flight() <= 2);
    CHECK(gen.peak_in_flight() >= 1);
    CHECK_THROWS_AS(InFlightLimiter(0), ConfigError);
}
