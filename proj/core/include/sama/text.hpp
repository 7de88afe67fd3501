#pragma once

#include <string>
#include <vector>

namespace sama {

// Closed instruction grammar. Every string the data generator or the pretext
// prompter can emit tokenizes under this vocabulary; anything else raises
// VocabError. The three bracketed task tokens are atomic entries.
class TextVocab {
  public:
    TextVocab();

    int size() const { return static_cast<int>(tokens_.size()); }
    const std::vector<std::string>& tokens() const { return tokens_; }
    const std::string& token(int id) const { return tokens_[static_cast<std::size_t>(id)]; }

    // Id lookup; throws VocabError for unknown tokens.
    int id(const std::string& token) const;

    // Splits an instruction into ids. A leading "[...]" span is matched as a
    // single task token; the remainder splits on spaces. Empty input yields
    // an empty id list.
    std::vector<int> encode(const std::string& text) const;

    // The versioned grammar document shipped with the repo; tests keep it in
    // sync with this vocabulary.
    static std::string grammar_document();

  private:
    std::vector<std::string> tokens_;
};

const TextVocab& text_vocab();  // shared immutable instance

}  // namespace sama
