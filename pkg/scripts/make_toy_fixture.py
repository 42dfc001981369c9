"""Write the toy view-building fixture shipped in src/mvet/toy/.

Ten entities in two clusters: E01-E05 are mentioned only among water words
(cluster A), E06-E10 only among music words (cluster B).  A second language
covers a subset of the entities, so the assembled masks have known gaps:

    de corpus   mentions E01-E07 only
    de titles   E01-E08
    en desc     missing for E03, E06, E09
    de desc     E01, E02, E05, E06, E07

Usage: python scripts/make_toy_fixture.py [out_dir]
"""
import random
import sys
from pathlib import Path

WATER = "river boat harbor ship sail lake shore anchor canal ferry tide dock".split()
MUSIC = "guitar song album band drum concert piano singer chorus melody stage tour".split()
FILLER = "the of a in and with near".split()
WATER_DE = "fluss boot hafen schiff segel see ufer anker kanal faehre".split()
MUSIC_DE = "gitarre lied album band trommel konzert klavier saenger chor melodie".split()

IDS = [f"E{i:02d}" for i in range(1, 11)]
TYPES = {e: ("location,waterway" if i < 5 else "music,band") for i, e in enumerate(IDS)}

TITLES_EN = {
    "E01": "Blue River", "E02": "Harbor Ferry (ship)", "E03": "Lake Shore", "E04": "Grand Canal",
    "E05": "Anchor Dock", "E06": "Silver Band (band)", "E07": "Piano Song", "E08": "Drum Tour",
    "E09": "Stage Chorus (album)", "E10": "Melody Singer",
}
TITLES_DE = {
    "E01": "Blauer Fluss", "E02": "Hafen Faehre (Schiff)", "E03": "Ufer See", "E04": "Grosser Kanal",
    "E05": "Anker Hafen", "E06": "Silber Band (Band)", "E07": "Klavier Lied", "E08": "Trommel Konzert",
}
DESC_EN = {
    "E01": "a river with boat traffic and a busy harbor near the shore",
    "E02": "a ferry ship that sails the canal between the harbor and the dock",
    "E04": "the grand canal carries every boat and ferry through the city",
    "E05": "an old dock where ships anchor at high tide",
    "E07": "a piano song recorded by the singer for the album",
    "E08": "the drum tour of the band with a concert on every stage",
    "E10": "a singer known for melody and chorus on the concert stage",
}
DESC_DE = {
    "E01": "ein fluss mit boot und hafen am ufer",
    "E02": "eine faehre als schiff auf dem kanal zum hafen",
    "E05": "ein anker am hafen und ein schiff",
    "E06": "eine band mit gitarre und trommel im konzert",
    "E07": "ein lied am klavier mit saenger und chor",
}


def sentences(rng, ents, water, music, n_per_entity):
    out = []
    for i, e in enumerate(ents):
        words = water if i < 5 else music
        for _ in range(n_per_entity + 2 * (i % 5) - 4):
            body = rng.sample(words, 5) + rng.sample(FILLER, 2)
            rng.shuffle(body)
            body.insert(rng.randrange(len(body) + 1), f"@ENT:{e}")
            out.append(" ".join(body))
    # entity-free sentences keep the word clusters themselves coherent
    for _ in range(20 * len(ents)):
        words = water if rng.random() < 0.5 else music
        body = rng.sample(words, 6) + rng.sample(FILLER, 2)
        rng.shuffle(body)
        out.append(" ".join(body))
    rng.shuffle(out)
    return out


def vec_file(rng, words, dim, skip=()):
    words = sorted(set(words) - set(skip))
    rows = [f"{len(words)} {dim}"]
    for w in words:
        rows.append(w + " " + " ".join(f"{rng.gauss(0, 1):.6f}" for _ in range(dim)))
    return "\n".join(rows) + "\n"


def tokens(texts):
    from mvet.views import strip_parenthetical, tokenize
    out = []
    for t in texts:
        out += tokenize(strip_parenthetical(t) if "(" in t else t)
    return out


def main(out):
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    rng = random.Random(20240101)
    # short sentences with several mentions each; frequencies span tail and mid
    (out / "en.corpus.txt").write_text("\n".join(sentences(rng, IDS, WATER, MUSIC, 12)) + "\n")
    water_de = WATER_DE + ["wasser", "strom"]
    (out / "de.corpus.txt").write_text("\n".join(sentences(rng, IDS[:7], water_de, MUSIC_DE, 6)) + "\n")
    for name, table in (("en.titles.tsv", TITLES_EN), ("de.titles.tsv", TITLES_DE),
                        ("en.desc.tsv", DESC_EN), ("de.desc.tsv", DESC_DE)):
        (out / name).write_text("".join(f"{k}\t{v}\n" for k, v in table.items()))
    # a few words are left out of each vocabulary to exercise the OOV rule
    en_words = tokens(list(TITLES_EN.values()) + list(DESC_EN.values()))
    de_words = tokens(list(TITLES_DE.values()) + list(DESC_DE.values()))
    (out / "en.vec").write_text(vec_file(rng, en_words, 8, skip=("grand", "melody")))
    (out / "de.vec").write_text(vec_file(rng, de_words, 8, skip=("grosser",)))
    (out / "skeleton.tsv").write_text("".join(f"{e}\t{TYPES[e]}\n" for e in IDS))


if __name__ == "__main__":
    main(sys.argv[1] if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src" / "mvet" / "toy")
