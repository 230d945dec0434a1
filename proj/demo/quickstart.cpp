// Builds a small taxonomy, embeds it, measures distortion, then flattens it
// with the heuristic restructurer and compares the two trees.

#include <cstdio>

#include "hyperhier/hyperhier.hpp"

using namespace hyperhier;

int main() {
  const auto original = parse_text(
      "Food\n"
      "  Pizza\n"
      "    NamedPizza\n"
      "      Margherita\n"
      "      Napoletana\n"
      "      Rosa\n"
      "  Topping\n"
      "    CheeseTopping\n"
      "      Mozzarella\n"
      "      Parmesan\n"
      "    VegetableTopping\n"
      "      PepperTopping\n"
      "        GreenPepper\n"
      "        JalapenoPepper\n"
      "      Tomato\n");

  const auto props = compute_properties(original);
  std::printf("nodes %zu depth %zu max degree %zu avg bf %.1f\n", props.num_nodes, props.depth, props.max_degree,
              props.avg_branching_factor);

  const auto config = EmbeddingConfig::for_tree(props.depth, props.max_degree);
  const auto emb = embed(original, config, Strategy::Hadamard);
  const auto rep = evaluate(emb, original, 64);
  std::printf("dim %zu tau %.4f  D_avg %.4f  D_wc %.4f\n", config.dimension, config.tau, rep.d_avg, rep.d_wc);

  const auto flat = heuristic_restructure(original, RecommendationSet::parse("r1"));
  std::printf("\n%s\n%s", flat.explanation.c_str(), serialize_text(flat.tree).c_str());

  const auto cmp = compare_trees(original, flat.tree, {});
  for (const auto& row : cmp.rows)
    std::printf("%-12s tau %.4f  D_avg %.4f  D_wc %.4f\n", row.variant.c_str(), row.config.tau, row.report.d_avg,
                row.report.d_wc);
}
