#pragma once

#include <string>
#include <vector>

namespace mcqa {

// Display symbols for choice positions ("A"/"B"/..., or replacement sets of
// rare tokens). Multi-codepoint symbols are stored as literal UTF-8.
struct ChoiceSymbolSet {
    std::string name;
    std::vector<std::string> symbols;

    bool valid_for(std::size_t choice_count) const { return symbols.size() >= choice_count; }
};

// Builtin sets: "default" (A..Z), "set1" ($ & # @), "set2" (œ § З ü).
// "set2" names map to literal codepoints; "Ze (Cyrillic)" is З, U+0417.
ChoiceSymbolSet builtin_symbol_set(const std::string& name);

ChoiceSymbolSet default_symbols();

}  // namespace mcqa
