// Generates the bundled synthetic mini-corpus used by the acceptance tests
// and the README walkthrough.
#include <cstdio>
#include <string>

#include <CLI11.hpp>

#include "fixture_gen.hpp"

int main(int argc, char** argv) {
    CLI::App app{"write the synthetic review-hijacking fixture corpus"};
    std::string out_dir = "fixture";
    hijackdet::fixture::FixtureSpec spec;
    app.add_option("--out", out_dir, "output directory")->capture_default_str();
    app.add_option("--seed", spec.seed, "fixture seed")->capture_default_str();
    app.add_option("--products-per-category", spec.products_per_category)
        ->capture_default_str();
    app.add_option("--reviews-per-product", spec.reviews_per_product)->capture_default_str();
    app.add_option("--planted", spec.planted, "fully hijacked products in the scoring catalog")
        ->capture_default_str();
    CLI11_PARSE(app, argc, argv);

    try {
        auto fx = hijackdet::fixture::make_fixture(spec);
        hijackdet::fixture::write_fixture(fx, out_dir);
        std::printf("fixture written to %s: %zu products, %zu reviews, %zu planted\n",
                    out_dir.c_str(), fx.train_catalog.products.size(),
                    fx.train_catalog.reviews.size(), fx.planted_ids.size());
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return 0;
}
