#include "mcqa/symbols.hpp"

#include "mcqa/error.hpp"

namespace mcqa {

ChoiceSymbolSet default_symbols() {
    ChoiceSymbolSet set;
    set.name = "default";
    for (char c = 'A'; c <= 'Z'; ++c) {
        set.symbols.emplace_back(1, c);
    }
    return set;
}

ChoiceSymbolSet builtin_symbol_set(const std::string& name) {
    if (name == "default") {
        return default_symbols();
    }
    if (name == "set1") {
        return ChoiceSymbolSet{"set1", {"$", "&", "#", "@"}};
    }
    if (name == "set2") {
        return ChoiceSymbolSet{"set2", {"œ", "§", "З", "ü"}};
    }
    throw Error(ErrorKind::ConfigInvalid, "unknown symbol set '" + name + "'");
}

}  // namespace mcqa
