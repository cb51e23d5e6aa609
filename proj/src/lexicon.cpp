#include "icl/lexicon.hpp"

namespace icl::lexicon {
namespace {

// 500 common English words, 3 to 9 letters, sorted.
constexpr std::array<std::string_view, 500> kWords = {
    "able", "about", "above", "actor", "adult", "adventure", "after", "again",
    "agent", "agree", "ahead", "aircraft", "airplane", "alarm", "album", "alert",
    "alike", "alive", "allow", "alone", "along", "alphabet", "alter", "amber",
    "among", "angle", "angry", "ankle", "ant", "apartment", "ape", "apple",
    "april", "apron", "arena", "argue", "arise", "arm", "armor", "arrow",
    "art", "ash", "aside", "asset", "astronaut", "atlas", "attic", "audio",
    "avalanche", "avoid", "awake", "award", "aware", "axe", "backpack", "badge",
    "bag", "baker", "balloon", "banjo", "bark", "barn", "basic", "basin",
    "basket", "bat", "batch", "bathroom", "battery", "bay", "beach", "bead",
    "bean", "bear", "beard", "beast", "bed", "bee", "begin", "being",
    "bell", "belly", "below", "bench", "berry", "bib", "bin", "bird",
    "birth", "birthday", "black", "blade", "blame", "blank", "blanket", "blast",
    "blend", "bless", "blind", "blizzard", "block", "bloom", "board", "boast",
    "boat", "bolt", "bone", "bonus", "book", "bookshelf", "boost", "boot",
    "booth", "border", "bottle", "bottom", "bow", "bowl", "box", "boy",
    "brain", "brave", "bread", "break", "bud", "bug", "building", "bulb",
    "bus", "butter", "butterfly", "cab", "cabinet", "cake", "calendar", "calf",
    "camera", "campfire", "candle", "canvas", "cap", "car", "carbon", "card",
    "cardinal", "carpenter", "carpet", "carriage", "carrot", "cart", "cartoon", "castle",
    "cat", "cathedral", "cave", "ceiling", "champion", "cheese", "cherry", "chestnut",
    "chicken", "children", "chip", "chipmunk", "chocolate", "chorus", "cinema", "circle",
    "city", "clam", "classroom", "clothing", "coastline", "coat", "coffee", "coin",
    "collar", "comb", "compass", "concert", "cord", "corner", "cottage", "cotton",
    "cousin", "cow", "crab", "crew", "crib", "cricket", "crocodile", "crossword",
    "crystal", "cub", "cucumber", "cup", "curtain", "dam", "dart", "daughter",
    "day", "dealer", "debate", "decade", "deer", "den", "desert", "design",
    "desk", "detail", "detective", "dew", "diamond", "dinner", "dinosaur", "dirt",
    "dish", "dishwater", "disk", "dock", "doctor", "dog", "doll", "dolphin",
    "donkey", "door", "doorbell", "dot", "double", "dove", "dragon", "dragonfly",
    "drawer", "driveway", "duck", "dumpling", "dune", "dust", "ear", "earthworm",
    "egg", "elephant", "elf", "elk", "elm", "engine", "envelope", "eye",
    "fabric", "family", "fan", "farmer", "fawn", "feather", "fern", "festival",
    "fiction", "fig", "film", "fin", "finger", "fir", "firefight", "fireplace",
    "fireworks", "fish", "flag", "flamingo", "foam", "fog", "football", "forest",
    "fork", "fossil", "fountain", "fox", "friend", "frog", "fur", "gallery",
    "gallon", "gap", "garage", "garden", "gardener", "gardening", "garlic", "gate",
    "gather", "gem", "gift", "ginger", "giraffe", "glacier", "goat", "gold",
    "goldfinch", "gown", "grassland", "gravel", "guacamole", "guitar", "gulf", "gum",
    "gym", "hail", "hairbrush", "hairpiece", "hammer", "handle", "harbor", "harbour",
    "hardware", "harmonica", "harvest", "hat", "headline", "hedgehog", "helmet", "hen",
    "highland", "highway", "hip", "hog", "holiday", "hospital", "hunter", "hurricane",
    "hut", "ice", "icon", "ink", "island", "jacket", "jam", "jar",
    "jellybean", "jellyfish", "jet", "jug", "jungle", "kangaroo", "kettle", "key",
    "keyboard", "kid", "kidney", "kit", "kitchen", "kitten", "lab", "ladder",
    "lake", "lamp", "landmark", "lantern", "lap", "lavender", "leader", "leg",
    "leopard", "library", "lid", "lifeguard", "limestone", "lion", "lip", "liquid",
    "little", "lizard", "lobster", "log", "machine", "magazine", "mammoth", "mansion",
    "map", "marathon", "marble", "margin", "marigolds", "market", "meadow", "measure",
    "meatball", "method", "microwave", "middle", "minute", "mirror", "monster", "morning",
    "mosquito", "mountain", "muffin", "mushroom", "mustard", "network", "newspaper", "nightfall",
    "notebook", "nutshells", "octopus", "ointment", "orchard", "orchestra", "ostrich", "overcoat",
    "package", "painter", "painting", "panorama", "panther", "parachute", "passage", "passport",
    "pavement", "peacock", "pelican", "penguin", "pilgrim", "pineapple", "plankton", "plastic",
    "platform", "poem", "pond", "porcupine", "porridge", "pottery", "pudding", "pumpkin",
    "pyramid", "question", "quicksand", "railroad", "rain", "rainbow", "raincoat", "raspberry",
    "reactor", "reindeer", "riverbank", "road", "roof", "rooftop", "rooster", "sailboat",
    "sailorman", "salt", "sand", "sandstone", "sandwich", "sausage", "saxophone", "scaffolds",
    "scanner", "scarecrow", "scholar", "seagull", "seashell", "seed", "shelter", "sheriff",
    "shoe", "shoulder", "shuttle", "sidewalk", "skeleton", "snowball", "snowflake", "snowstorm",
    "sofa", "soldier", "spaghetti", "sparrow", "spearmint", "squirrel", "staircase", "starfish",
    "station", "stomach", "stonewall", "student", "sunflower", "sunrise", "surface", "sweater",
    "tail", "tangerine", "teacher", "telephone", "textbook", "thumbnail", "triangle", "trumpet",
    "waterfall", "weather", "yard", "zero",
};

constexpr std::array<std::string_view, 50> kPositive = {
    "happy", "joyful", "lovely", "great", "superb", "cheerful", "bright", "kind",
    "gentle", "brave", "honest", "proud", "calm", "eager", "glad", "grateful",
    "hopeful", "jolly", "lucky", "merry", "nice", "peaceful", "pleasant", "polite",
    "radiant", "relaxed", "smart", "splendid", "sunny", "sweet", "thankful", "thrilled",
    "warm", "wise", "wonderful", "amazing", "awesome", "beautiful", "brilliant", "charming",
    "delight", "elegant", "excellent", "fabulous", "friendly", "generous", "glorious", "graceful",
    "healthy", "loyal",
};

constexpr std::array<std::string_view, 50> kNegative = {
    "sad", "angry", "awful", "bad", "bitter", "cruel", "dreadful", "gloomy",
    "grim", "guilty", "harsh", "hateful", "horrible", "hostile", "jealous", "lonely",
    "mean", "miserable", "nasty", "painful", "poor", "rude", "scary", "selfish",
    "sick", "sorry", "spiteful", "tense", "terrible", "tired", "ugly", "unhappy",
    "upset", "vicious", "wicked", "worried", "wretched", "annoyed", "anxious", "ashamed",
    "boring", "broken", "cranky", "dismal", "fearful", "furious", "grumpy", "hopeless",
    "nervous", "sour",
};

constexpr std::array<AntonymPair, 80> kAntonyms = {{
    {"hot", "cold"}, {"big", "small"}, {"fast", "slow"}, {"high", "low"},
    {"long", "short"}, {"hard", "soft"}, {"heavy", "light"}, {"wet", "dry"},
    {"old", "new"}, {"rich", "poor"}, {"early", "late"}, {"full", "empty"},
    {"open", "closed"}, {"thick", "thin"}, {"wide", "narrow"}, {"deep", "shallow"},
    {"loud", "quiet"}, {"strong", "weak"}, {"clean", "dirty"}, {"dark", "bright"},
    {"happy", "sad"}, {"good", "bad"}, {"true", "false"}, {"near", "far"},
    {"safe", "dangerous"}, {"sharp", "dull"}, {"rough", "smooth"}, {"sweet", "sour"},
    {"tight", "loose"}, {"young", "elderly"}, {"brave", "cowardly"}, {"cheap", "expensive"},
    {"wild", "tame"}, {"simple", "complex"}, {"easy", "difficult"}, {"public", "private"},
    {"major", "minor"}, {"polite", "rude"}, {"active", "passive"}, {"fresh", "stale"},
    {"raw", "cooked"}, {"ancient", "modern"}, {"awake", "asleep"}, {"alive", "dead"},
    {"calm", "anxious"}, {"kind", "cruel"}, {"wise", "foolish"}, {"sane", "insane"},
    {"legal", "illegal"}, {"visible", "hidden"}, {"noisy", "silent"}, {"upper", "lower"},
    {"inner", "outer"}, {"front", "rear"}, {"senior", "junior"}, {"solid", "liquid"},
    {"rare", "common"}, {"humble", "arrogant"}, {"generous", "stingy"}, {"tall", "tiny"},
    {"fat", "lean"}, {"guilty", "innocent"}, {"male", "female"}, {"sober", "drunk"},
    {"famous", "unknown"}, {"vertical", "flat"}, {"careful", "careless"}, {"friendly", "hostile"},
    {"lucky", "unlucky"}, {"gentle", "harsh"}, {"proud", "ashamed"}, {"cheerful", "gloomy"},
    {"bold", "timid"}, {"absent", "present"}, {"correct", "wrong"}, {"first", "last"},
    {"maximum", "minimum"}, {"vacant", "occupied"}, {"pretty", "ugly"}, {"thrilled", "bored"},
}};

constexpr std::array<std::string_view, 21> kNumberWords = {
    "zero", "one", "two", "three", "four", "five", "six", "seven", "eight", "nine", "ten",
    "eleven", "twelve", "thirteen", "fourteen", "fifteen", "sixteen", "seventeen",
    "eighteen", "nineteen", "twenty",
};

}  // namespace

std::span<const std::string_view> common_words() { return kWords; }
std::span<const std::string_view> positive_words() { return kPositive; }
std::span<const std::string_view> negative_words() { return kNegative; }
std::span<const AntonymPair> antonym_pairs() { return kAntonyms; }
std::span<const std::string_view> number_words() { return kNumberWords; }

}  // namespace icl::lexicon
