#!/usr/bin/env python3
"""Replayable 30-paper x 5-dataset corpus with golden reports.

Writes, next to this script:
  datasets.csv, venues.csv, run.ini     run inputs
  cache/                                recorded HTTP responses + GROBID output
  scraped/                              PDFs served by the directory scraper
  golden/presence.csv, golden/cumulative.csv, golden/groups.csv

The goldens are derived from the plan below (what was planted where and
which sources each paper has), not by running the tool.

    python3 gen_minicorpus.py
"""

import csv
import hashlib
import json
import os
import random
import shutil
from urllib.parse import quote
from xml.sax.saxutils import escape

HERE = os.path.dirname(os.path.abspath(__file__))
DATA = os.path.join(HERE, "..", "..", "..", "data", "datasets.csv")

DATASETS = ["acdc", "brats", "camelyon", "chexpert", "drive"]
# OpenAlex IDs for the dataset papers; chexpert's DOI is absent from the index.
DATASET_WORK = {"acdc": "W2803396512", "brats": "W1641498739", "camelyon": "W2890371467", "drive": "W2098754196"}

SURFACES = {
    "acdc": ["ACDC", "Automated Cardiac Diagnosis Challenge", "https://www.creatis.insa-lyon.fr/Challenge/acdc/"],
    "brats": ["BraTS", "BRATS", "https://www.med.upenn.edu/cbica/brats/"],
    "camelyon": ["CAMELYON16", "Camelyon17", "https://camelyon17.grand-challenge.org"],
    "chexpert": ["CheXpert", "https://stanfordmlgroup.github.io/competitions/chexpert/"],
    "drive": ["DRIVE", "https://drive.grand-challenge.org/"],
}
DECOY_TOKENS = {"acdc": "ACDCNet", "brats": "BraTS2020", "drive": "drive", "camelyon": "CAMELYON17x",
                "chexpert": "CheXpertNet"}

YEARS = {"miccai": (2018, 2022), "midl": (2019, 2022)}

# meta: doi | title | notfound | ambiguous
# refs: some | empty | absent
# ft:   oa | oa_html_dir | oa_html_none | dir | none | pmlr | pmlr_404 | grobid_fail
PAPERS = [
    # miccai
    dict(meta="doi", abs=True, refs="some", ft="oa", tei_abs=True),
    dict(meta="doi", abs=True, refs="some", ft="oa", tei_abs=True),
    dict(meta="doi", abs=True, refs="some", ft="oa_html_dir", tei_abs=True),
    dict(meta="doi", abs=False, refs="some", ft="oa", tei_abs=False),
    dict(meta="doi", abs=True, refs="empty", ft="oa", tei_abs=True),
    dict(meta="doi", abs=False, refs="absent", ft="dir", tei_abs=True),
    dict(meta="doi", abs=True, refs="some", ft="none", tei_abs=False),
    dict(meta="doi", abs=True, refs="absent", ft="none", tei_abs=False),
    dict(meta="doi", abs=False, refs="some", ft="none", tei_abs=False),
    dict(meta="doi", abs=False, refs="absent", ft="none", tei_abs=False),
    dict(meta="notfound", abs=False, refs="absent", ft="dir", tei_abs=True),
    dict(meta="notfound", abs=False, refs="absent", ft="none", tei_abs=False),
    dict(meta="doi", abs=True, refs="some", ft="grobid_fail", tei_abs=False),
    dict(meta="doi", abs=False, refs="empty", ft="grobid_fail", tei_abs=False),
    dict(meta="doi", abs=True, refs="some", ft="oa", tei_abs=False),
    dict(meta="doi", abs=True, refs="some", ft="oa", tei_abs=True),
    dict(meta="doi", abs=True, refs="empty", ft="oa_html_none", tei_abs=False),
    dict(meta="doi", abs=True, refs="some", ft="dir", tei_abs=True),
    dict(meta="doi", abs=True, refs="some", ft="oa", tei_abs=True),
    dict(meta="doi", abs=False, refs="some", ft="oa", tei_abs=True),
    # midl
    dict(meta="title", abs=True, refs="some", ft="pmlr", tei_abs=True),
    dict(meta="title", abs=True, refs="absent", ft="pmlr", tei_abs=True),
    dict(meta="title", abs=True, refs="some", ft="pmlr_404", tei_abs=False),
    dict(meta="ambiguous", abs=False, refs="absent", ft="pmlr", tei_abs=True),
    dict(meta="title", abs=False, refs="some", ft="pmlr", tei_abs=True),
    dict(meta="title", abs=True, refs="some", ft="oa", tei_abs=True),
    dict(meta="notfound", abs=False, refs="absent", ft="pmlr_404", tei_abs=False),
    dict(meta="title", abs=True, refs="some", ft="pmlr", tei_abs=False),
    dict(meta="doi", abs=True, refs="some", ft="pmlr", tei_abs=True),
    dict(meta="title", abs=True, refs="empty", ft="pmlr_404", tei_abs=False),
]

TEI_CHANNELS = ["tei_abstract", "body", "figure", "table", "footnote", "title"]

WORDS = ["robust", "sparse", "graph", "contrastive", "implicit", "uncertainty", "shape", "boundary",
         "federated", "multiscale", "attention", "diffusion", "topology", "prior", "adaptive", "weakly"]
NOUNS = ["Segmentation", "Registration", "Classification", "Detection", "Reconstruction", "Tracking"]
FILLER = ["The network was trained for one hundred epochs.", "We report the mean over five folds.",
          "Learning rate decay followed a cosine schedule.", "Augmentation included flips and small rotations."]
UNRELATED_REF = "He, K., et al.: Deep residual learning for image recognition. CVPR (2016)"


# ---------------------------------------------------------------------------
# Cache layout shared with the tool: <cache>/<slug(host)>/<sha256(key)>.json

def build_url(base, params):
    out = base
    sep = "&" if "?" in base else "?"
    for k in sorted(params):
        out += sep + quote(k, safe="") + "=" + quote(params[k], safe="")
        sep = "&"
    return out


def slugify(s):
    out = "".join(c if c.isascii() and (c.isalnum() or c in "._-") else "_" for c in s)
    return out.lstrip("._")


def host_of(url):
    rest = url.split("://", 1)[1]
    for i, c in enumerate(rest):
        if c in "/?#":
            return rest[:i].lower()
    return rest.lower()


def is_punct(ch):
    cp = ord(ch)
    if cp < 0x80:
        return 0x20 < cp < 0x7F and not ch.isalnum()
    return 0xA1 <= cp <= 0xBF or cp in (0xD7, 0xF7) or 0x2010 <= cp <= 0x205E


def normalize_title(s):
    return " ".join("".join(" " if is_punct(c) else (c.lower() if ord(c) < 0x80 else c) for c in s).split())


class Cache:
    def __init__(self, root):
        self.root = root

    def put(self, base, params, status, body, content_type="application/json"):
        key = build_url(base, params)
        path = os.path.join(self.root, slugify(host_of(base)), hashlib.sha256(key.encode()).hexdigest() + ".json")
        os.makedirs(os.path.dirname(path), exist_ok=True)
        env = {"url": key, "status": status, "content_type": content_type, "body": body}
        with open(path, "w", encoding="utf-8") as f:
            f.write(json.dumps(env, indent=1, ensure_ascii=False) + "\n")


def openalex_doi(cache, doi, works):
    cache.put("https://api.openalex.org/works", {"filter": "doi:" + doi}, 200,
              json.dumps({"meta": {"count": len(works)}, "results": works}))


def openalex_title(cache, title, works):
    cache.put("https://api.openalex.org/works",
              {"filter": "title.search:" + normalize_title(title), "per-page": "50"}, 200,
              json.dumps({"meta": {"count": len(works)}, "results": works}))


def inverted(text):
    idx = {}
    for pos, tok in enumerate(text.split()):
        idx.setdefault(tok, []).append(pos)
    return idx


# ---------------------------------------------------------------------------

def registry_rows():
    with open(DATA, encoding="utf-8") as f:
        lines = f.read().splitlines()
    header, rows = lines[0], [l for l in lines[1:] if l.split("|")[0] in DATASETS]
    return header, rows, {l.split("|")[0]: l.split("|") for l in rows}


def pdf_bytes(paper_id, source):
    return "%PDF-1.4\n% {} via {}\n%%EOF\n".format(paper_id, source)


def render_tei(t):
    e = escape
    parts = ['<?xml version="1.0" encoding="UTF-8"?>', '<TEI xmlns="http://www.tei-c.org/ns/1.0">',
             '<teiHeader><fileDesc><titleStmt><title level="a" type="main">{}</title></titleStmt></fileDesc>'.format(
                 e(t["title"]))]
    if t["abstract"] is not None:
        parts.append("<profileDesc><abstract><div><p>{}</p></div></abstract></profileDesc>".format(e(t["abstract"])))
    parts.append("</teiHeader><text><body>")
    for head, paras in t["sections"]:
        parts.append("<div><head>{}</head>{}</div>".format(e(head), "".join("<p>{}</p>".format(e(p)) for p in paras)))
    figs = "".join('<figure><head>Fig. {}.</head><figDesc>{}</figDesc></figure>'.format(i + 1, e(s))
                   for i, s in enumerate(t["figures"]))
    tabs = "".join('<figure type="table"><head>Table {}.</head><figDesc>{}</figDesc><table/></figure>'.format(
        i + 1, e(s)) for i, s in enumerate(t["tables"]))
    parts.append("<div><head>Evaluation</head><p>{}</p>{}{}</div>".format(e(FILLER[0]), figs, tabs))
    for i, s in enumerate(t["footnotes"]):
        parts.append('<note place="foot" n="{}">{}</note>'.format(i + 1, e(s)))
    parts.append('</body><back><div type="references"><listBibl>')
    for i, raw in enumerate(t["refs"]):
        parts.append('<biblStruct xml:id="b{}"><monogr><title level="j">Journal</title></monogr>'
                     '<note type="raw_reference">{}</note></biblStruct>'.format(i, e(raw)))
    parts.append("</listBibl></div></back></text></TEI>")
    return "\n".join(parts) + "\n"


def main():
    rng = random.Random(424242)
    for sub in ("cache", "scraped", "golden"):
        shutil.rmtree(os.path.join(HERE, sub), ignore_errors=True)
    cache = Cache(os.path.join(HERE, "cache"))
    grobid_dir = os.path.join(HERE, "cache", "grobid")
    scraped_dir = os.path.join(HERE, "scraped")
    os.makedirs(grobid_dir)
    os.makedirs(scraped_dir)
    os.makedirs(os.path.join(HERE, "golden"))

    header, rows, registry = registry_rows()
    with open(os.path.join(HERE, "datasets.csv"), "w", encoding="utf-8") as f:
        f.write("\n".join([header] + rows) + "\n")
    with open(os.path.join(HERE, "venues.csv"), "w", encoding="utf-8") as f:
        f.write("venue_id,display_name,dblp_key,years\n"
                "miccai,Medical Image Computing and Computer-Assisted Intervention,conf/miccai,2018-2022\n"
                "midl,Medical Imaging with Deep Learning,conf/midl,2019-2022\n")
    with open(os.path.join(HERE, "run.ini"), "w", encoding="utf-8") as f:
        f.write("datasets = datasets.csv\nvenues = venues.csv\nout = out\ncache = cache\n"
                "workers = 4\nspacing_ms = 0\n\n[scrapers]\nmiccai = dir:scraped\nmidl = pmlr\n")

    # Dataset paper lookups.
    for ds in DATASETS:
        doi = registry[ds][5]
        works = [] if ds == "chexpert" else [{"id": "https://openalex.org/" + DATASET_WORK[ds], "doi": "https://doi.org/" + doi}]
        openalex_doi(cache, doi, works)

    hits = {"miccai": [], "midl": []}
    papers = []
    for i, spec in enumerate(PAPERS):
        venue = "miccai" if i < 20 else "midl"
        lo, hi = YEARS[venue]
        year = rng.randint(lo, hi)
        surname = "Author{:02d}".format(i)
        key = "conf/{}/{}{}".format(venue, surname, str(year)[2:])
        pid = slugify(key)
        title = "{} {} for Medical Image {} {}".format(rng.choice(WORDS).capitalize(), rng.choice(WORDS),
                                                     rng.choice(NOUNS), i)
        doi = "10.1007/978-3-030-{:05d}-{}_{}".format(10000 + i, year % 10, i) if spec["meta"] in ("doi", "notfound") else None
        if venue == "midl" and spec["meta"] == "doi":
            doi = "10.5555/midl.{}.{}".format(year, i)
        landing = "https://proceedings.mlr.press/v{}/{}{}a.html".format(100 + year - 2018, surname.lower(), str(year)[2:]) \
            if venue == "midl" else ("https://doi.org/" + doi if doi else None)
        info = {"title": title + ".", "year": str(year), "type": "Conference and Workshop Papers", "key": key,
                "venue": venue.upper()}
        if doi:
            info["doi"] = doi
        if landing:
            info["ee"] = landing
        hits[venue].append({"@id": str(1000 + i), "info": info})

        p = dict(spec, i=i, pid=pid, venue=venue, year=year, title=title, doi=doi, landing=landing, plants=[],
                 decoys=[])
        papers.append(p)

    # DBLP decoys: an editorship and an out-of-range year per venue.
    for venue in hits:
        hits[venue].append({"@id": "9001", "info": {"title": "Proceedings of {} 2020.".format(venue.upper()),
                                                    "year": "2020", "type": "Editorship",
                                                    "key": "conf/{}/2020".format(venue)}})
        hits[venue].append({"@id": "9002", "info": {"title": "An Old Paper.", "year": "2015",
                                                    "type": "Conference and Workshop Papers",
                                                    "key": "conf/{}/Old15".format(venue)}})
        rng.shuffle(hits[venue])
        body = {"result": {"hits": {"@total": str(len(hits[venue])), "@sent": str(len(hits[venue])),
                                     "@first": "0", "hit": hits[venue]}}}
        cache.put("https://dblp.org/search/publ/api",
                  {"q": "stream:streams/conf/{}:".format(venue), "format": "json", "h": "1000", "f": "0"},
                  200, json.dumps(body))

    # Plan per paper: which sources exist, what is planted where.
    for p in papers:
        found = p["meta"] in ("doi", "title")
        has_pdf = p["ft"] in ("oa", "oa_html_dir", "dir", "pmlr", "grobid_fail")
        has_tei = has_pdf and p["ft"] != "grobid_fail"
        p["has_tei"] = has_tei
        channels = []
        if found and p["refs"] == "some":
            channels.append("ref")
        if found and p["abs"]:
            channels.append("oa_abstract")
        if has_tei:
            channels += ["body", "figure", "table", "footnote", "title"]
            if p["tei_abs"]:
                channels.append("tei_abstract")
        if channels:
            for ds in rng.sample(DATASETS, rng.randint(1, 3)):
                for ch in rng.sample(channels, rng.randint(1, min(2, len(channels)))):
                    p["plants"].append((ds, ch))
        planted = {ds for ds, _ in p["plants"]}
        p["decoy_ds"] = [d for d in DATASETS if d not in planted]

    def abstract_text(p):
        words = ["We", "study", p["title"].lower(), "."]
        for ds, ch in p["plants"]:
            if ch == "oa_abstract":
                words += ["Experiments", "use", rng.choice(SURFACES[ds]), "."]
        if p["decoy_ds"]:
            words += ["Unlike", DECOY_TOKENS[rng.choice(p["decoy_ds"])], "baselines", "."]
        return " ".join(words)

    for p in papers:
        found = p["meta"] in ("doi", "title")
        work = {"id": "https://openalex.org/W5{:09d}".format(p["i"]), "display_name": p["title"],
                "publication_year": p["year"]}
        if p["doi"]:
            work["doi"] = "https://doi.org/" + p["doi"]
        if p["refs"] != "absent":
            refs = ["https://openalex.org/W7{:09d}".format(p["i"] * 10 + k) for k in range(3)]
            if p["refs"] == "some":
                for ds, ch in p["plants"]:
                    if ch == "ref" and ds in DATASET_WORK:
                        refs.insert(1, "https://openalex.org/" + DATASET_WORK[ds])
                refs.append("https://openalex.org/W4000000001")  # chexpert's paper, unresolved
            else:
                refs = []
            work["referenced_works"] = refs
        p["oa_abstract_text"] = abstract_text(p) if p["abs"] else None
        if p["abs"]:
            work["abstract_inverted_index"] = inverted(p["oa_abstract_text"])
        oa_url = None
        if p["ft"] in ("oa", "oa_html_dir", "oa_html_none"):
            oa_url = "https://arxiv.org/pdf/2{:03d}.{:05d}.pdf".format(p["year"] % 100, p["i"])
            work["best_oa_location"] = {"pdf_url": oa_url}
        elif p["ft"] == "grobid_fail":
            oa_url = "https://repo.example.org/files/{}.pdf".format(p["pid"])
            work["open_access"] = {"oa_url": oa_url}

        if p["meta"] == "doi":
            openalex_doi(cache, p["doi"], [work])
        elif p["meta"] == "notfound":
            openalex_doi(cache, p["doi"], []) if p["doi"] else openalex_title(cache, p["title"], [])
        elif p["meta"] == "title":
            near = dict(work, id="https://openalex.org/W6{:09d}".format(p["i"]), display_name=p["title"] + " Revisited")
            openalex_title(cache, p["title"], [near, work])
        else:  # ambiguous: two distinct works with the same normalized title
            twin = dict(work, id="https://openalex.org/W6{:09d}".format(p["i"]), display_name=p["title"].upper())
            openalex_title(cache, p["title"], [work, twin])
        if not found:
            oa_url = None

        # Full-text artifacts.
        pdf = None
        if p["ft"] == "oa" or p["ft"] == "grobid_fail":
            pdf = pdf_bytes(p["pid"], "oa")
            cache.put(oa_url, {}, 200, pdf, "application/pdf")
        elif p["ft"] in ("oa_html_dir", "oa_html_none"):
            cache.put(oa_url, {}, 200, "<html><body>Paywall</body></html>", "text/html")
        if p["ft"] in ("oa_html_dir", "dir"):
            pdf = pdf_bytes(p["pid"], "dir")
            with open(os.path.join(scraped_dir, p["pid"] + ".pdf"), "w", encoding="utf-8") as f:
                f.write(pdf)
        if p["venue"] == "midl" and p["ft"] in ("pmlr", "pmlr_404"):
            stem = p["landing"].rsplit("/", 1)[1][:-5]
            pdf_url = p["landing"].rsplit("/", 1)[0] + "/" + stem + "/" + stem + ".pdf"
            if p["ft"] == "pmlr":
                pdf = pdf_bytes(p["pid"], "pmlr")
                cache.put(pdf_url, {}, 200, pdf, "application/pdf")
            else:
                cache.put(pdf_url, {}, 404, "Not Found", "text/html")
        if pdf is None:
            continue
        digest = hashlib.sha256(pdf.encode()).hexdigest()
        if p["ft"] == "grobid_fail":
            with open(os.path.join(grobid_dir, digest + ".failed"), "w", encoding="utf-8") as f:
                f.write("GROBID returned HTTP 500")
            continue

        t = {"title": p["title"], "abstract": None, "sections": [], "figures": [], "tables": [], "footnotes": [],
             "refs": [UNRELATED_REF]}
        abstract = ["We study " + p["title"].lower() + "."]
        body = [FILLER[1]]
        for ds, ch in p["plants"]:
            s = "We evaluate on {}.".format(rng.choice(SURFACES[ds]))
            if ch == "tei_abstract":
                abstract.append(s)
            elif ch == "body":
                body.append(s)
            elif ch == "figure":
                t["figures"].append(s)
            elif ch == "table":
                t["tables"].append(s)
            elif ch == "footnote":
                t["footnotes"].append(s)
            elif ch == "title":
                title = registry[ds][4]
                t["refs"].append("Smith, A., et al.: {}. Journal (2019)".format(title.lower().replace(":", ".")))
        if p["tei_abs"]:
            t["abstract"] = " ".join(abstract)
        t["sections"].append(("Methods", body))
        if p["decoy_ds"]:
            d = rng.choice(p["decoy_ds"])
            t["sections"].append(("Related Work", ["Earlier methods were tuned on {}.".format(SURFACES[d][0])]))
            t["figures"].append("Comparison with {} variants.".format(DECOY_TOKENS[d]))
            t["refs"].append("Doe, J.: Notes from the {} workshop (2020)".format(registry[d][1]))
        with open(os.path.join(grobid_dir, digest + ".tei.xml"), "w", encoding="utf-8") as f:
            f.write(render_tei(t))

    # -----------------------------------------------------------------------
    # Goldens from the plan.
    groups = []
    records = []  # (pid, venue, year, ds, type)
    for p in papers:
        found = p["meta"] in ("doi", "title")
        ft = p["has_tei"]
        abs_ = found and p["abs"]
        refs = found and p["refs"] == "some"
        if ft and refs:
            g = "group1"
        elif ft:
            g = "group3"
        elif abs_ or refs:
            g = "group2"
        else:
            g = "discarded"
        groups.append((p["pid"], g))
        if g == "discarded":
            continue
        cited, mentioned = set(), set()
        for ds, ch in p["plants"]:
            if ch == "ref" and refs and ds in DATASET_WORK:
                cited.add(ds)
            elif ch == "title" and ft:
                cited.add(ds)
            elif ch in ("tei_abstract", "body", "figure", "table", "footnote") and ft:
                mentioned.add(ds)
            elif ch == "oa_abstract" and abs_:
                # Full-text papers use the OpenAlex abstract only when GROBID found none.
                if not ft or not p["tei_abs"]:
                    mentioned.add(ds)
        for ds in sorted(cited | mentioned):
            kind = "cited_and_mentioned" if ds in cited and ds in mentioned else (
                "only_cited" if ds in cited else "only_mentioned")
            records.append((p["pid"], p["venue"], p["year"], ds, kind))

    types = ["only_cited", "only_mentioned", "cited_and_mentioned"]
    with open(os.path.join(HERE, "golden", "presence.csv"), "w", encoding="utf-8") as f:
        f.write("dataset,venue,type,count,total\n")
        for ds in sorted({r[3] for r in records}):
            for venue in sorted({r[1] for r in records if r[3] == ds}):
                sel = [r for r in records if r[3] == ds and r[1] == venue]
                for t in types:
                    f.write("{},{},{},{},{}\n".format(ds, venue, t, sum(r[4] == t for r in sel), len(sel)))

    first = min(lo for lo, _ in YEARS.values())
    last = max(hi for _, hi in YEARS.values())
    with open(os.path.join(HERE, "golden", "cumulative.csv"), "w", encoding="utf-8") as f:
        f.write("dataset,kind,year,count\n")
        for ds in sorted({r[3] for r in records}):
            for kind, counts in (("citations", ("only_cited", "cited_and_mentioned")),
                                 ("mentions", ("only_mentioned", "cited_and_mentioned"))):
                for y in range(first, last + 1):
                    n = sum(1 for r in records if r[3] == ds and r[4] in counts and r[2] <= y)
                    f.write("{},{},{},{}\n".format(ds, kind, y, n))

    with open(os.path.join(HERE, "golden", "groups.csv"), "w", encoding="utf-8") as f:
        f.write("paper_id,group\n")
        for pid, g in sorted(groups):
            f.write("{},{}\n".format(pid, g))


if __name__ == "__main__":
    main()
