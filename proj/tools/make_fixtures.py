#!/usr/bin/env python3
"""Regenerates the synthetic slot-filling fixtures under data/.

Output is deterministic: same script, same files.
"""

import json
import random
from pathlib import Path

ROOT = Path(__file__).resolve().parent.parent
DATA = ROOT / "data"

LABELS = ["artist", "song", "genre", "playlist", "city", "date", "time", "cuisine"]

VALUES = {
    "artist": ["adele", "miles davis", "taylor swift", "bob marley", "nina simone", "the beatles",
               "frank ocean", "billie holiday", "daft punk", "johnny cash", "aretha franklin", "prince"],
    "song": ["yesterday", "blue in green", "hey jude", "redemption song", "feeling good", "hello",
             "one more time", "ring of fire", "respect", "purple rain", "strange fruit", "shake it off"],
    "genre": ["jazz", "rock", "soul", "blues", "reggae", "country", "hip hop", "classical", "metal", "folk"],
    "playlist": ["road trip", "morning coffee", "workout", "rainy day", "dinner party", "late night",
                 "sunday chill", "focus"],
    "city": ["paris", "rome", "seoul", "boston", "chicago", "lisbon", "new york", "berlin", "tokyo",
             "nice", "denver", "austin"],
    "date": ["tomorrow", "monday", "friday", "next week", "this weekend", "sunday", "tonight",
             "saturday"],
    "time": ["noon", "eight pm", "seven thirty", "six am", "midnight", "nine", "two pm"],
    "cuisine": ["italian", "thai", "mexican", "indian", "korean", "greek", "french", "sushi"],
}

# (pattern, ...) with {slot} holes; literal words must not collide with slot values.
CLEAN = [
    "play {song} by {artist}",
    "put on some {genre} music",
    "add {song} to my {playlist} playlist",
    "play the {playlist} playlist",
    "what will the weather be in {city} {date}",
    "will it rain in {city} on {date}",
    "book a table at a {cuisine} place in {city} at {time}",
    "find a {cuisine} restaurant for {date} at {time}",
    "play something by {artist}",
    "add some {genre} to {playlist}",
    "i want to hear {artist}",
    "set an alarm for {time} {date}",
]

PARAPHRASE = [
    "could you start {song} from {artist}",
    "i would like to listen to {genre} right now",
    "put {song} on the {playlist} list",
    "start my {playlist} mix please",
    "how does the forecast look for {city} {date}",
    "should i expect rain around {city} on {date}",
    "reserve me a {cuisine} spot in {city} at {time}",
    "look up {cuisine} food for {date} around {time}",
    "let me hear a track from {artist}",
    "throw a bit of {genre} into {playlist}",
    "i am in the mood for {artist}",
    "wake me up at {time} {date}",
]

SIMPLIFICATION = [
    "{song} {artist}",
    "{genre} music",
    "{song} to {playlist}",
    "{playlist} playlist",
    "weather {city} {date}",
    "rain {city} {date}",
    "{cuisine} table {city} {time}",
    "{cuisine} food {date} {time}",
    "{artist} songs",
    "{genre} into {playlist}",
    "{artist} now",
    "alarm {time} {date}",
]

VERBOSE = [
    "hey there so i was wondering if you could maybe play {song} by {artist} for me right now",
    "okay so what i really want at this moment is to put on some {genre} music if that works",
    "when you get a chance i would love it if you added {song} to my {playlist} playlist thanks",
    "alright can you go ahead and start playing the {playlist} playlist that i made earlier",
    "i am planning my day so tell me what the weather will be like in {city} {date} please",
    "before i head out i need to know whether it will rain in {city} on {date} or not",
    "my friends are visiting so please book a table at a {cuisine} place in {city} at {time} for us",
    "i am getting hungry so could you find a {cuisine} restaurant for {date} at around {time}",
    "you know what i feel like it so go on and play something by {artist} for a while",
    "when you have a moment please add some {genre} to {playlist} so it sounds better",
    "honestly after the day i had i just really want to hear {artist} for a bit",
    "i have an early start so please set an alarm for {time} {date} and do not forget",
]


def fill(pattern, rng):
    tokens, spans = [], []
    for word in pattern.split():
        if word.startswith("{") and word.endswith("}"):
            label = word[1:-1]
            value = rng.choice(VALUES[label]).split()
            spans.append({"start": len(tokens), "end": len(tokens) + len(value) - 1, "type": label})
            tokens.extend(value)
        else:
            tokens.append(word)
    return tokens, spans


def make_split(name, patterns, count, seed):
    rng = random.Random(seed)
    rows = []
    for i in range(count):
        tokens, spans = fill(patterns[i % len(patterns)], rng)
        rows.append({"id": f"{name}-{i:03d}", "tokens": tokens, "spans": spans})
    return rows


def write(path, rows):
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for r in rows:
            f.write(json.dumps(r, ensure_ascii=False) + "\n")


def main():
    DATA.mkdir(exist_ok=True)
    (DATA / "slots.labels").write_text("\n".join(LABELS) + "\n", encoding="utf-8")
    write(DATA / "train.jsonl", make_split("train", CLEAN, 120, 11))
    write(DATA / "test_clean.jsonl", make_split("clean", CLEAN, 30, 23))
    write(DATA / "test_paraphrase.jsonl", make_split("para", PARAPHRASE, 30, 23))
    write(DATA / "test_simplification.jsonl", make_split("simp", SIMPLIFICATION, 30, 23))
    write(DATA / "test_verbose.jsonl", make_split("verb", VERBOSE, 30, 23))


if __name__ == "__main__":
    main()
