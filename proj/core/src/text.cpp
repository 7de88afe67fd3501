#include "sama/text.hpp"

#include <sstream>
#include <unordered_map>

#include "sama/errors.hpp"

namespace sama {

namespace {

const std::unordered_map<std::string, int>& token_ids(const std::vector<std::string>& tokens) {
    static const std::unordered_map<std::string, int> ids = [&tokens] {
        std::unordered_map<std::string, int> m;
        for (std::size_t i = 0; i < tokens.size(); ++i) m.emplace(tokens[i], static_cast<int>(i));
        return m;
    }();
    return ids;
}

}  // namespace

TextVocab::TextVocab() {
    tokens_ = {
        // atomic task tokens
        "[Complete the missing regions in the video.]",
        "[Restore the video to normal playback speed.]",
        "[Restore the correct spatio-temporal order of the video segments.]",
        // template words
        "a", "add", "invert", "moves", "of", "remove", "stays", "still", "the",
        "turn", "video", "colors",
        // directions
        "left", "right", "up", "down",
        // colors
        "red", "green", "blue", "yellow", "cyan", "magenta", "white", "gray",
        // shapes
        "square", "circle", "triangle",
    };
}

int TextVocab::id(const std::string& token) const {
    const auto& ids = token_ids(tokens_);
    const auto it = ids.find(token);
    if (it == ids.end()) throw VocabError("token outside the instruction grammar: '" + token + "'");
    return it->second;
}

std::vector<int> TextVocab::encode(const std::string& text) const {
    std::vector<int> out;
    std::size_t pos = 0;
    if (!text.empty() && text.front() == '[') {
        const std::size_t close = text.find(']');
        if (close == std::string::npos) {
            throw VocabError("unterminated task token in: '" + text + "'");
        }
        out.push_back(id(text.substr(0, close + 1)));
        pos = close + 1;
    }
    while (pos < text.size()) {
        while (pos < text.size() && text[pos] == ' ') ++pos;
        if (pos >= text.size()) break;
        std::size_t end = text.find(' ', pos);
        if (end == std::string::npos) end = text.size();
        out.push_back(id(text.substr(pos, end - pos)));
        pos = end;
    }
    return out;
}

std::string TextVocab::grammar_document() {
    const TextVocab vocab;
    std::ostringstream os;
    os << "instruction grammar, version 1\n"
       << "\n"
       << "Instructions are space-separated words over a closed vocabulary. A prompt\n"
       << "may begin with exactly one atomic task token (a full bracketed sentence),\n"
       << "followed by an optional caption.\n"
       << "\n"
       << "task-token :=\n"
       << "  [Complete the missing regions in the video.]\n"
       << "  [Restore the video to normal playback speed.]\n"
       << "  [Restore the correct spatio-temporal order of the video segments.]\n"
       << "\n"
       << "caption := \"a\" color shape \"moves\" direction\n"
       << "         | \"a\" color shape \"stays\" \"still\"\n"
       << "edit    := \"turn\" \"the\" color shape color\n"
       << "         | \"remove\" \"the\" color shape\n"
       << "         | \"add\" \"a\" color shape\n"
       << "         | \"invert\" \"the\" \"colors\" \"of\" \"the\" \"video\"\n"
       << "\n"
       << "color     := red | green | blue | yellow | cyan | magenta | white | gray\n"
       << "shape     := square | circle | triangle\n"
       << "direction := left | right | up | down\n"
       << "\n"
       << "vocabulary (" << vocab.size() << " tokens, in id order):\n";
    for (const std::string& token : vocab.tokens()) os << token << '\n';
    return os.str();
}

const TextVocab& text_vocab() {
    static const TextVocab vocab;
    return vocab;
}

}  // namespace sama
