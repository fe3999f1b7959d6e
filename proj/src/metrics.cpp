#include "evoloop/metrics.hpp"

#include "evoloop/error.hpp"
#include "evoloop/feedback.hpp"
#include "json_io.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>

namespace evoloop {

using json_io::json;

std::string_view to_string(Difficulty d) { return d == Difficulty::advanced ? "advanced" : "basic"; }

Difficulty parse_difficulty(std::string_view s) {
    if (s == "basic") return Difficulty::basic;
    if (s == "advanced") return Difficulty::advanced;
    throw Error(ErrorCode::config_error, "unknown difficulty: " + std::string(s));
}

std::string Ratio::describe() const {
    std::string out = std::to_string(passed) + "/" + std::to_string(total);
    if (total == 0) return out + " (n/a)";
    char buf[32];
    std::snprintf(buf, sizeof buf, " (%.4f)", value());
    return out + buf;
}

namespace {

const TestCase& resolve(const std::string& id, const std::vector<TestReport>& reports) {
    auto sep = id.find("::");
    const TestCase* found = nullptr;
    std::size_t matches = 0;
    for (const auto& r : reports) {
        if (sep != std::string::npos && r.suite != id.substr(0, sep)) continue;
        auto case_id = sep == std::string::npos ? id : id.substr(sep + 2);
        for (const auto& c : r.cases)
            if (c.test_id == case_id) {
                found = &c;
                ++matches;
            }
    }
    if (matches == 0) throw Error(ErrorCode::unknown_test_id, "no test case \"" + id + "\" in the reports");
    if (matches > 1) throw Error(ErrorCode::unknown_test_id, "test id \"" + id + "\" is ambiguous; use suite::id");
    return *found;
}

json ratio_json(const Ratio& r) { return json{{"passed", r.passed}, {"total", r.total}, {"ratio", r.value()}}; }

Ratio ratio_from(const json& j) { return Ratio{j.at("passed").get<std::size_t>(), j.at("total").get<std::size_t>()}; }

} // namespace

AccuracyReport compute_accuracy(const std::vector<RequirementBinding>& bindings,
                                const std::vector<TestReport>& reports) {
    AccuracyReport out;
    for (const auto& b : bindings) {
        if (b.test_ids.empty())
            throw Error(ErrorCode::config_error, "requirement has no test ids: " + b.requirement);
        RequirementStatus st{b.requirement, b.difficulty, false, 0, b.test_ids.size()};
        for (const auto& id : b.test_ids)
            if (resolve(id, reports).status == TestStatus::pass) ++st.cases_passed;
        st.passed = st.cases_passed == st.cases_total;
        auto& bucket = b.difficulty == Difficulty::basic ? out.basic : out.advanced;
        ++bucket.total;
        ++out.overall.total;
        if (st.passed) {
            ++bucket.passed;
            ++out.overall.passed;
        }
        out.requirements.push_back(std::move(st));
    }
    return out;
}

std::vector<RequirementBinding> parse_bindings(std::string_view json_text) {
    auto j = json_io::parse(json_text, "bindings");
    if (!j.is_array()) throw Error(ErrorCode::config_error, "bindings must be a JSON array");
    std::vector<RequirementBinding> out;
    for (const auto& item : j) {
        if (!item.is_object()) throw Error(ErrorCode::config_error, "each binding must be an object");
        json_io::require_known_keys(item, "binding", {"requirement", "difficulty", "tests"});
        try {
            RequirementBinding b;
            b.requirement = item.at("requirement").get<std::string>();
            b.difficulty = parse_difficulty(item.value("difficulty", std::string("basic")));
            b.test_ids = item.at("tests").get<std::vector<std::string>>();
            if (b.test_ids.empty())
                throw Error(ErrorCode::config_error, "requirement has no test ids: " + b.requirement);
            out.push_back(std::move(b));
        } catch (const json::exception& e) {
            throw Error(ErrorCode::config_error, std::string("bad binding: ") + e.what());
        }
    }
    return out;
}

std::vector<RequirementBinding> load_bindings(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw Error(ErrorCode::config_error, "cannot read bindings file " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_bindings(ss.str());
}

std::vector<TestReport> final_reports(const EvolutionRun& run) {
    if (run.snapshots.empty()) return {};
    return run.snapshots.back().feedback.test_reports();
}

std::string render_report(const EvolutionRun& run, const AccuracyReport& acc, ReportFormat format) {
    if (format == ReportFormat::structured) {
        json reqs = json::array();
        for (const auto& r : acc.requirements)
            reqs.push_back(json{{"requirement", r.requirement},
                                {"difficulty", std::string(to_string(r.difficulty))},
                                {"passed", r.passed},
                                {"cases_passed", r.cases_passed},
                                {"cases_total", r.cases_total}});
        json iterations = json::array();
        for (const auto& s : run.snapshots) {
            auto t = s.feedback.counts();
            iterations.push_back(json{{"k", s.k}, {"passed", t.passed}, {"total", t.total()}});
        }
        json digests = json::object();
        for (const auto& [rel, d] : tree_digests(run.run_dir)) digests[rel] = d;
        json doc{{"accuracy",
                  {{"overall", ratio_json(acc.overall)},
                   {"basic", ratio_json(acc.basic)},
                   {"advanced", ratio_json(acc.advanced)},
                   {"requirements", reqs}}},
                 {"run",
                  {{"task", run.task.name},
                   {"termination", std::string(to_string(run.termination))},
                   {"iterations", iterations},
                   {"digests", digests}}}};
        return json_io::dump(doc);
    }

    std::string out = "task: " + (run.task.name.empty() ? std::string("(unnamed)") : run.task.name) + "\n";
    out += "termination: " + std::string(to_string(run.termination)) + "\n";
    if (!run.failure.empty()) out += "failure: " + run.failure + "\n";
    for (const auto& s : run.snapshots) {
        auto t = s.feedback.counts();
        out += "iteration " + std::to_string(s.k) + ": " + std::to_string(t.passed) + "/" +
               std::to_string(t.total()) + " tests passed\n";
    }
    if (acc.requirements.empty()) {
        out += "accuracy: no requirements bound\n";
        return out;
    }
    out += "accuracy: " + acc.overall.describe() + "\n";
    out += "basic: " + acc.basic.describe() + "\n";
    out += "advanced: " + acc.advanced.describe() + "\n";
    for (const auto& r : acc.requirements)
        out += std::string(r.passed ? "PASS" : "FAIL") + " [" + std::string(to_string(r.difficulty)) + "] " +
               r.requirement + "\n";
    return out;
}

AccuracyReport parse_structured_report(std::string_view json_text) {
    auto doc = json_io::parse(json_text, "report");
    try {
        const auto& a = doc.at("accuracy");
        AccuracyReport acc;
        acc.overall = ratio_from(a.at("overall"));
        acc.basic = ratio_from(a.at("basic"));
        acc.advanced = ratio_from(a.at("advanced"));
        for (const auto& r : a.at("requirements"))
            acc.requirements.push_back(RequirementStatus{r.at("requirement").get<std::string>(),
                                                         parse_difficulty(r.at("difficulty").get<std::string>()),
                                                         r.at("passed").get<bool>(),
                                                         r.at("cases_passed").get<std::size_t>(),
                                                         r.at("cases_total").get<std::size_t>()});
        return acc;
    } catch (const json::exception& e) {
        throw Error(ErrorCode::config_error, std::string("malformed report: ") + e.what());
    }
}

} // namespace evoloop
