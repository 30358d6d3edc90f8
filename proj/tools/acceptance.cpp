// Runs the default experiment and prints one line per acceptance check.
// Thresholds are the pinned defaults of Tolerances; only the output directory
// can be chosen (first argument).

#include <iostream>

#include "mm/pipeline.hpp"

int main(int argc, char** argv) {
    mm::ExperimentConfig c = mm::default_config();
    c.out_dir = argc > 1 ? argv[1] : "acceptance_out";
    try {
        const mm::AcceptanceReport r = mm::run_pipeline(c, [](const std::string& s) { std::cerr << s << "\n"; });
        mm::emit_plots(r, c.out_dir + "/plots");
        int passed = 0;
        for (const mm::Check& k : r.checks) {
            std::cout << mm::summary_line(k) << "\n";
            passed += k.pass();
        }
        std::cout << "acceptance complete: " << passed << "/" << r.checks.size() << " passed\n";
        return r.all_pass() ? 0 : 1;
    } catch (const std::exception& e) {
        std::cerr << "acceptance aborted: " << e.what() << "\n";
        return 3;
    }
}
