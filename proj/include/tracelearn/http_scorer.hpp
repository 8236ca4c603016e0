#pragma once

// Optional CompletionModel backed by a masked-fill HTTP endpoint. The request
// carries the rendered prompt and the candidate list; the response maps each
// candidate to a positive score. Any failure (connect, timeout, bad payload,
// nonpositive score) falls back to the deterministic default scorer so a
// synthesis run never blocks on the network.

#include <string>
#include <vector>

#include "httplib.h"
#include "json.hpp"
#include "tracelearn/completer.hpp"

namespace tracelearn {

class HttpModel final : public CompletionModel {
  public:
    explicit HttpModel(std::string url, CoocTable fallback_table = {},
                       int timeout_seconds = 1)
        : fallback_(std::move(fallback_table)), timeout_(timeout_seconds) {
        auto scheme = url.find("://");
        auto path_start =
            url.find('/', scheme == std::string::npos ? 0 : scheme + 3);
        if (path_start == std::string::npos) {
            base_ = url;
            path_ = "/";
        } else {
            base_ = url.substr(0, path_start);
            path_ = url.substr(path_start);
        }
    }

    std::string name() const override { return "http"; }

    double score(const Candidate& c, const PartialProgram& partial,
                 const HoleRef& h,
                 const std::vector<Demonstration>& demos) const override {
        return score_all({c}, partial, h, demos)[0];
    }

    std::vector<double> score_all(
        const std::vector<Candidate>& cs, const PartialProgram& partial,
        const HoleRef& h,
        const std::vector<Demonstration>& demos) const override {
        try {
            std::string prompt = render_prompt(partial.ast, h);
            nlohmann::json req;
            req["prompt"] = prompt;
            auto& arr = req["candidates"] = nlohmann::json::array();
            for (const auto& c : cs) arr.push_back(c.text);

            httplib::Client cli(base_);
            cli.set_connection_timeout(timeout_, 0);
            cli.set_read_timeout(timeout_, 0);
            cli.set_write_timeout(timeout_, 0);
            auto res = cli.Post(path_, req.dump(), "application/json");
            if (!res || res->status != 200)
                return fallback_.score_all(cs, partial, h, demos);

            nlohmann::json rsp = nlohmann::json::parse(res->body);
            const auto& scores = rsp.at("scores");
            std::vector<double> out;
            out.reserve(cs.size());
            for (const auto& c : cs) {
                double w = scores.at(c.text).get<double>();
                if (!(w > 0.0)) return fallback_.score_all(cs, partial, h, demos);
                out.push_back(w);
            }
            return out;
        } catch (...) {
            return fallback_.score_all(cs, partial, h, demos);
        }
    }

  private:
    DefaultModel fallback_;
    std::string base_;
    std::string path_;
    int timeout_ = 1;
};

}  // namespace tracelearn
