#include "support.hpp"

#include <algorithm>
#include <functional>
#include <map>
#include <stdexcept>

namespace support {

TempDir::TempDir() {
    auto base = fs::temp_directory_path();
    std::string pattern = (base / "evoloop-test-XXXXXX").string();
    if (::mkdtemp(pattern.data()) == nullptr) throw std::runtime_error("mkdtemp failed");
    path_ = pattern;
}

TempDir::~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
}

std::string fake_runner_path() { return EVOLOOP_FAKE_RUNNER; }

evoloop::SandboxConfig sandbox_config(const fs::path& work_parent) {
    evoloop::SandboxConfig cfg;
    cfg.work_parent = work_parent;
    cfg.timeout = std::chrono::milliseconds(10000);
    cfg.runner_command = {fake_runner_path()};
    return cfg;
}

std::string fenced_file(const std::string& name, const std::string& body, const std::string& lang) {
    return name + "\n```" + lang + "\n" + body + "\n```\n";
}

std::string network_reply(const std::string& prefix,
                          const std::vector<std::pair<std::string, std::string>>& composition,
                          const std::vector<std::pair<std::string, std::string>>& workflow) {
    std::string out = prefix + "### COMPOSITION\n\n```\n";
    for (const auto& [label, desc] : composition) out += label + ": " + desc + "\n";
    out += "```\n\n### WORKFLOW\n\n```\n";
    for (const auto& [label, deps] : workflow) out += label + ": [" + deps + "]\n";
    out += "```\n";
    return out;
}

evoloop::TaskSpec calc_task() {
    evoloop::TaskSpec t;
    t.name = "calculator";
    t.description = "Write a Python module main.py with functions add(a, b) and sub(a, b).";
    t.modality = "library";
    t.requirements = {"add(a, b) returns the sum of a and b", "sub(a, b) returns a minus b"};
    return t;
}

std::string calc_test_suite() {
    return "# evoloop-case: test_add file-contains main.py def add(\n"
           "# evoloop-case: test_sub file-contains main.py def sub(\n"
           "import unittest\n"
           "\n"
           "import main\n"
           "\n"
           "\n"
           "class TestCalculator(unittest.TestCase):\n"
           "    def test_add(self):\n"
           "        self.assertEqual(main.add(2, 3), 5)\n"
           "\n"
           "    def test_sub(self):\n"
           "        self.assertEqual(main.sub(5, 3), 2)\n"
           "\n"
           "\n"
           "if __name__ == \"__main__\":\n"
           "    unittest.main()";
}

std::string calc_main_add_only() {
    return "def add(a, b):\n"
           "    return a + b\n"
           "\n"
           "\n"
           "if __name__ == \"__main__\":\n"
           "    print(add(2, 3))";
}

std::string calc_main_full() {
    return "def add(a, b):\n"
           "    return a + b\n"
           "\n"
           "\n"
           "def sub(a, b):\n"
           "    return a - b\n"
           "\n"
           "\n"
           "if __name__ == \"__main__\":\n"
           "    print(add(2, 3), sub(5, 3))";
}

std::vector<evoloop::ScriptEntry> calc_script() {
    using evoloop::ScriptEntry;
    using evoloop::ScriptKey;
    std::vector<ScriptEntry> s;
    s.push_back({ScriptKey::seq(0),
                 network_reply("The tests cover both functions.\n\n",
                               {{"Task 1", "Write unit tests for add(a, b) and sub(a, b) in main.py"}},
                               {{"Task 1", ""}})});
    s.push_back({ScriptKey::seq(1), fenced_file("test_requirement_0.py", calc_test_suite())});
    s.push_back({ScriptKey::seq(2), network_reply("", {{"Task 1", "Create main.py with add(a, b) returning a + b"}},
                                                  {{"Task 1", ""}})});
    s.push_back({ScriptKey::seq(3), "Here is the module.\n\n" + fenced_file("main.py", calc_main_add_only())});
    s.push_back({ScriptKey::seq(4), "file name:main.py\n"
                                    "\n"
                                    "function name: sub\n"
                                    "\n"
                                    "detailed analysis of the problem: main.py never defines sub, so test_sub "
                                    "fails. Add sub(a, b) returning a - b.\n"});
    s.push_back({ScriptKey::seq(5), "### REQUIREMENTS PROGRESS\n"
                                    "\n"
                                    "requirement: add(a, b) returns the sum of a and b\n"
                                    "\n"
                                    "achieved: True\n"
                                    "\n"
                                    "double-checked: True\n"
                                    "\n"
                                    "detailed progress: add is implemented and tested.\n"
                                    "\n"
                                    "requirement: sub(a, b) returns a minus b\n"
                                    "\n"
                                    "achieved: False\n"
                                    "\n"
                                    "double-checked: True\n"
                                    "\n"
                                    "detailed progress: sub is missing from main.py.\n"
                                    "\n" +
                                        network_reply("", {{"Programmer 2", "Add sub(a, b) to main.py returning a - b; keep add unchanged"}},
                                                      {{"Programmer 2", ""}})});
    s.push_back({ScriptKey::seq(6), fenced_file("main.py", calc_main_full())});
    return s;
}

evoloop::EvolutionConfig calc_config(const fs::path& work_parent) {
    evoloop::EvolutionConfig cfg;
    cfg.max_iterations = 4;
    cfg.sandbox = sandbox_config(work_parent);
    return cfg;
}

std::string random_description(Rng& rng) {
    static const std::vector<std::string> words{"parse", "the", "input", "file", "render", "a", "board", "score",
                                                "(x,", "y)", "update", "state.", "check", "win-condition", "log",
                                                "game.log", "handle", "keys", "draw", "snake", "it's", "100%"};
    std::uniform_int_distribution<std::size_t> len(1, 12), pick(0, words.size() - 1);
    std::string out;
    auto n = len(rng);
    for (std::size_t i = 0; i < n; ++i) {
        if (i) out += ' ';
        out += words[pick(rng)];
    }
    return out;
}

evoloop::NetworkDraft random_draft(Rng& rng, std::size_t max_nodes, evoloop::LabelKind kind) {
    std::uniform_int_distribution<std::size_t> size_dist(1, max_nodes);
    auto n = size_dist(rng);
    std::vector<std::size_t> numbers(n);
    // Labels need not be contiguous.
    std::uniform_int_distribution<std::size_t> gap(1, 3);
    std::size_t next = 1;
    for (auto& x : numbers) {
        x = next;
        next += gap(rng);
    }
    std::shuffle(numbers.begin(), numbers.end(), rng);
    std::vector<std::string> labels;
    for (auto x : numbers) labels.push_back(std::string(evoloop::label_prefix(kind)) + " " + std::to_string(x));

    // Hidden rank order: edges only go from lower to higher rank.
    std::vector<std::size_t> rank(n);
    for (std::size_t i = 0; i < n; ++i) rank[i] = i;
    std::shuffle(rank.begin(), rank.end(), rng);

    std::bernoulli_distribution edge(n > 1 ? 2.0 / static_cast<double>(n) : 0.0);
    evoloop::NetworkDraft d;
    for (std::size_t i = 0; i < n; ++i) d.composition.emplace_back(labels[i], random_description(rng));
    for (std::size_t i = 0; i < n; ++i) {
        std::vector<std::string> deps;
        for (std::size_t j = 0; j < n; ++j)
            if (rank[j] < rank[i] && edge(rng)) deps.push_back(labels[j]);
        std::shuffle(deps.begin(), deps.end(), rng);
        d.workflow[labels[i]] = deps;
    }
    return d;
}

Digraph random_digraph(Rng& rng, std::size_t max_nodes) {
    std::uniform_int_distribution<std::size_t> size_dist(1, max_nodes);
    auto n = size_dist(rng);
    Digraph g;
    for (std::size_t i = 0; i < n; ++i) g.ids.push_back("N" + std::to_string(i));
    std::uniform_real_distribution<double> density(0.0, 3.0 / static_cast<double>(n));
    std::bernoulli_distribution edge(std::min(1.0, density(rng)));
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (i != j && edge(rng)) g.edges.emplace(g.ids[i], g.ids[j]);
    return g;
}

bool oracle_has_cycle(const Digraph& g) {
    std::map<std::string, std::vector<std::string>> adj;
    for (const auto& [a, b] : g.edges) adj[a].push_back(b);
    std::map<std::string, int> color; // 0 white, 1 grey, 2 black
    std::function<bool(const std::string&)> visit = [&](const std::string& u) {
        color[u] = 1;
        for (const auto& v : adj[u]) {
            if (color[v] == 1) return true;
            if (color[v] == 0 && visit(v)) return true;
        }
        color[u] = 2;
        return false;
    };
    for (const auto& id : g.ids)
        if (color[id] == 0 && visit(id)) return true;
    return false;
}

} // namespace support
