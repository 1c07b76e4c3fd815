#include "dialact/default_data.hpp"
#include "dialact/grammar.hpp"

namespace dialact {

ActInventory default_inventory() {
  return parse_inventory(generated::kInventory, "<default inventory>");
}

DialogueGrammar default_grammar(const ActInventory& inventory) {
  return parse_grammar(generated::kGrammar, inventory, "<default grammar>")
      .with_compatibility(default_compatibility(inventory));
}

CompatibilityTable default_compatibility(const ActInventory& inventory) {
  return parse_compatibility(generated::kCompatibility, inventory, "<default compatibility>");
}

KeywordLexicon default_lexicon(const ActInventory& inventory) {
  return parse_lexicon(generated::kLexicon, inventory, "<default lexicon>");
}

}  // namespace dialact
