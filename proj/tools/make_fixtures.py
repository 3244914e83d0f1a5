#!/usr/bin/env python3
"""Regenerates the bundled corpora under data/fixtures.

All text is synthetic. The PSW statistics expected by the acceptance suite are
computed here, independently of the C++ implementation, and written next to
the corpora as <name>.stats.json.
"""

import json
import pathlib
import sys

ROOT = pathlib.Path(__file__).resolve().parent.parent
OUT = ROOT / "data" / "fixtures"

# --- shared synthetic research users ------------------------------------------

AREAS = {
    "u-01": ("graph neural networks", ["message passing", "node classification", "graph pooling",
                                       "over-smoothing", "heterophily", "graph transformers"]),
    "u-02": ("retrieval augmented generation", ["dense retrieval", "passage reranking", "query rewriting",
                                                "knowledge grounding", "citation accuracy", "long context"]),
    "u-03": ("federated learning", ["client drift", "secure aggregation", "personalized federated models",
                                    "communication compression", "non-iid data", "differential privacy"]),
    "u-04": ("speech recognition", ["streaming decoders", "accent robustness", "self-supervised audio",
                                    "end-to-end transducers", "low-resource languages", "noise augmentation"]),
    "u-05": ("protein structure prediction", ["contact maps", "folding dynamics", "sequence embeddings",
                                              "multiple sequence alignment", "binding sites", "structure refinement"]),
    "u-06": ("reinforcement learning", ["reward shaping", "offline policies", "exploration bonuses",
                                        "model-based planning", "policy gradients", "sample efficiency"]),
    "u-07": ("computer vision", ["object detection", "semantic segmentation", "vision transformers",
                                 "few-shot recognition", "image captioning", "domain adaptation"]),
    "u-08": ("language model personalization", ["user profiles", "preference learning", "style transfer",
                                                 "persona consistency", "history summarization", "prompt design"]),
}


def psw_history(user):
    area, topics = AREAS[user]
    entries = []
    for i, topic in enumerate(topics):
        title = f"Improving {topic} for {area}"
        abstract = (f"We study {topic} in {area}. Our method combines {topic} with "
                    f"{topics[(i + 1) % len(topics)]} and reports consistent gains on standard "
                    f"{area} benchmarks while reducing cost.")
        entries.append({"input": title, "output": abstract, "meta": {"year": str(2015 + i)}})
    return entries


PAPERS = [
    (["u-08", "u-02", "u-06"], "Step-wise profile distillation for collaborative writing assistants",
     "We distill user profiles from interaction histories and combine retrieval of past papers with "
     "preference learning to personalize drafting for teams of authors."),
    (["u-01", "u-07", "u-03"], "Federated graph transformers for privacy-aware scene understanding",
     "We train graph transformers over scene graphs across clients with secure aggregation and show "
     "that object detection benefits from message passing under non-iid data."),
    (["u-04", "u-02", "u-08"], "Retrieval-grounded speech assistants with persona consistency",
     "We ground streaming speech recognition outputs in retrieved passages and keep persona consistency "
     "across long dialogues using user profiles."),
    (["u-05", "u-06", "u-01"], "Policy gradients for protein structure refinement on contact graphs",
     "We cast structure refinement as reinforcement learning over contact graphs, using graph neural "
     "networks as policies and reward shaping from folding dynamics."),
    (["u-07", "u-04", "u-03"], "Domain adaptation for audio-visual recognition on federated devices",
     "We adapt vision transformers and self-supervised audio encoders across federated devices with "
     "communication compression and noise augmentation."),
]

REFERENCES = [
    ["Attention is all you need", "Dense passage retrieval for open-domain question answering",
     "Learning to summarize from human feedback"],
    ["Semi-supervised classification with graph convolutional networks", "Communication-efficient learning of deep networks from decentralized data",
     "End-to-end object detection with transformers", "Practical secure aggregation for privacy-preserving machine learning"],
    ["Streaming end-to-end speech recognition for mobile devices", "Retrieval-augmented generation for knowledge-intensive tasks"],
    ["Highly accurate protein structure prediction", "Proximal policy optimization algorithms",
     "Graph attention networks"],
    ["An image is worth 16x16 words", "wav2vec 2.0: a framework for self-supervised learning of speech representations",
     "Federated optimization in heterogeneous networks", "Unsupervised domain adaptation by backpropagation",
     "SpecAugment: a simple data augmentation method"],
]

QUESTIONS = [
    ["How much does profile distillation improve multi-author drafting?",
     "Does author order change the personalized output?",
     "Which history items matter most for a profile?"],
    ["Can graph transformers be trained federatedly without accuracy loss?",
     "How does non-iid data affect scene graph quality?",
     "What does secure aggregation cost in this setting?"],
    ["Does retrieval grounding reduce speech assistant errors?",
     "How stable is persona consistency over long dialogues?",
     "Which retrieval depth works best for streaming input?"],
    ["Can reward shaping from folding dynamics guide refinement?",
     "Do graph policies generalize to unseen proteins?",
     "How sample efficient is the refinement policy?"],
    ["How well do audio-visual encoders adapt across devices?",
     "What compression rate preserves recognition accuracy?",
     "Does noise augmentation help federated adaptation?"],
]

ROLES = ["first_author", "middle_author", "last_author"]


def psw_authors(users):
    authors = []
    for pos, user in enumerate(users):
        role = ROLES[0] if pos == 0 else (ROLES[2] if pos == len(users) - 1 else ROLES[1])
        authors.append({"id": user, "position": pos, "role": role})
    return authors


def psw_instance(task, index, users, title, abstract):
    refs = REFERENCES[index]
    context = {
        "title": [title],
        "abstract": [abstract],
        "reference_count": [str(len(refs))],
        "references": refs,
        "research_questions": QUESTIONS[index],
    }
    if task == "psw1":
        inp, target = "\n".join(refs), title
    elif task == "psw2":
        inp, target = title, QUESTIONS[index]
    elif task == "psw3":
        inp, target = title, abstract
    else:
        inp, target = abstract, title
    return {
        "id": f"{task}-{index + 1:03d}",
        "task": task,
        "input": inp,
        "target": target,
        "authors": psw_authors(users),
        "histories": {u: psw_history(u) for u in users},
        "context": context,
    }


def up0_instances():
    out = []
    for index, user in enumerate(["u-01", "u-02", "u-05", "u-06", "u-08"]):
        area, topics = AREAS[user]
        out.append({
            "id": f"up0-{index + 1:03d}",
            "task": "up0",
            "input": f"Summarize the research interests of author {user}.",
            "target": [area] + topics[:3],
            "authors": [{"id": user, "position": 0, "role": "first_author"}],
            "histories": {user: psw_history(user)},
            "context": {"research_interests": [area] + topics[:3]},
        })
    return out


# --- LaMP-style single-user tasks ----------------------------------------------

REVIEWS = {
    "r-01": [("Battery lasts all day and the screen is sharp.", 5), ("Solid build, fast shipping.", 4),
             ("Works as described, good value.", 4), ("Charger stopped working after a week.", 2),
             ("Excellent sound quality for the price.", 5), ("Great keyboard, quiet keys.", 4)],
    "r-02": [("Arrived broken and support never answered.", 1), ("Cheap plastic, feels flimsy.", 2),
             ("Instructions were confusing.", 2), ("Does the job but nothing special.", 3),
             ("Too loud and overheats quickly.", 1), ("Color faded after one wash.", 2)],
    "r-03": [("Decent blender, a bit noisy.", 3), ("Fine for everyday use.", 3),
             ("Pretty good lamp, warm light.", 4), ("Average knife set.", 3),
             ("The strap broke but the watch is fine.", 3), ("Okay headphones for commuting.", 3)],
    "r-04": [("Love this coffee grinder, consistent grind.", 5), ("Best running shoes I have owned.", 5),
             ("Comfortable chair with good lumbar support.", 4), ("Perfect fit and soft fabric.", 5),
             ("Bright flashlight with long battery life.", 5), ("Nice backpack, many pockets.", 4)],
    "r-05": [("Not worth the money.", 2), ("Stopped charging after a month.", 1),
             ("Mediocre camera, blurry photos.", 2), ("Acceptable mouse, scroll wheel sticks.", 3),
             ("Fan is louder than advertised.", 2), ("Remote lost pairing constantly.", 1)],
}

LAMP3_QUERIES = [
    ("r-01", "Crisp display and the battery easily lasts two days.", 5),
    ("r-02", "Handle snapped on first use and the seller ignored me.", 1),
    ("r-03", "Reasonable kettle, boils fast but the lid is stiff.", 3),
    ("r-04", "Wonderful espresso machine, rich crema every time.", 5),
    ("r-05", "Speaker crackles at high volume.", 2),
]

LAMP3_PAIR = [
    ("r-01", "Pairing fixture alpha: the tablet case fits loosely.", 2),
    ("r-03", "Pairing fixture beta: the desk lamp is flawless.", 5),
]

SCHOLARS = {
    "s-01": [("We propose a sparse attention mechanism that scales linearly with sequence length.",
              "Linear-time sparse attention for long documents"),
             ("We study how pretraining data size affects downstream robustness of language models.",
              "Data scale and robustness in pretrained language models"),
             ("We introduce a benchmark for long document summarization with human references.",
              "A benchmark for long document summarization"),
             ("We analyze attention heads to explain summarization errors.",
              "Explaining summarization errors through attention analysis")],
    "s-02": [("We design a lightweight detector for drones running on embedded hardware.",
              "Real-time drone detection on embedded hardware"),
             ("We compress convolutional networks with structured pruning for mobile inference.",
              "Structured pruning for mobile convolutional networks"),
             ("We quantize detection models to four bits with minimal accuracy loss.",
              "Four-bit quantization of object detectors")],
    "s-03": [("We measure gender bias in machine translation across twelve languages.",
              "Measuring gender bias in multilingual machine translation"),
             ("We propose debiasing objectives for translation models.",
              "Debiasing objectives for neural machine translation"),
             ("We release a dataset of counterfactual sentence pairs for bias evaluation.",
              "Counterfactual sentence pairs for bias evaluation")],
    "s-04": [("We model user preferences in music streaming with session graphs.",
              "Session graphs for music recommendation"),
             ("We study cold-start recommendation using content embeddings.",
              "Content embeddings for cold-start recommendation"),
             ("We evaluate fairness of exposure in playlist generation.",
              "Fairness of exposure in playlist generation")],
    "s-05": [("We forecast electricity demand with temporal fusion models.",
              "Temporal fusion models for electricity demand forecasting"),
             ("We detect anomalies in smart meter readings with autoencoders.",
              "Autoencoder anomaly detection for smart meters"),
             ("We study probabilistic forecasting for renewable generation.",
              "Probabilistic forecasting of renewable generation")],
}

LAMP5_QUERIES = [
    ("s-01", "We propose a memory-efficient attention variant for summarizing very long documents.",
     "Memory-efficient attention for long document summarization"),
    ("s-02", "We prune and quantize detectors jointly for real-time inference on drones.",
     "Joint pruning and quantization for real-time drone detection"),
    ("s-03", "We evaluate debiasing methods for translation on counterfactual pairs.",
     "Evaluating translation debiasing with counterfactual pairs"),
    ("s-04", "We combine session graphs and content embeddings for cold-start music recommendation.",
     "Session graphs meet content embeddings for cold-start music recommendation"),
    ("s-05", "We build probabilistic demand forecasts with temporal fusion and anomaly filtering.",
     "Probabilistic demand forecasting with temporal fusion"),
]


def single(task, index, user, inp, target, history, **extra):
    inst = {
        "id": f"{task}-{index + 1:03d}",
        "task": task,
        "input": inp,
        "target": target,
        "authors": [{"id": user, "position": 0}],
        "histories": {user: history},
    }
    inst.update(extra)
    return inst


def lamp3(queries, name_prefix="lamp3"):
    out = []
    for i, (user, text, rating) in enumerate(queries):
        hist = [{"input": t, "output": str(r), "meta": {}} for t, r in REVIEWS[user]]
        inst = single("lamp3", i, user, text, rating, hist)
        inst["id"] = f"{name_prefix}-{i + 1:03d}"
        out.append(inst)
    return out


def scholar_history(user):
    return [{"input": a, "output": t, "meta": {}} for a, t in SCHOLARS[user]]


def lamp5():
    return [single("lamp5", i, u, a, t, scholar_history(u)) for i, (u, a, t) in enumerate(LAMP5_QUERIES)]


def lamp4():
    out = []
    for i, (u, a, t) in enumerate(LAMP5_QUERIES):
        hist = [{"input": abst, "output": title, "meta": {}} for abst, title in SCHOLARS[u]]
        out.append(single("lamp4", i, u, a, t, hist))
    return out


def lamp1():
    out = []
    for i, (u, a, t) in enumerate(LAMP5_QUERIES):
        hist = [{"input": title, "output": abst, "meta": {}} for abst, title in SCHOLARS[u]]
        own = SCHOLARS[u][0][1]
        other = SCHOLARS[LAMP5_QUERIES[(i + 1) % 5][0]][0][1]
        candidates = [own, other] if i % 2 == 0 else [other, own]
        out.append(single("lamp1", i, u, t, own, hist, candidates=candidates))
    return out


CATEGORIES = ["business", "sports", "science", "politics", "entertainment"]


def lamp2():
    articles = [
        ("s-01", "Researchers release a benchmark for long documents.", "science"),
        ("s-02", "Drone startup raises new funding round.", "business"),
        ("s-03", "Parliament debates translation of public services.", "politics"),
        ("s-04", "Streaming service tops the music charts.", "entertainment"),
        ("s-05", "Local team wins the regional final.", "sports"),
    ]
    out = []
    for i, (u, text, label) in enumerate(articles):
        hist = [{"input": abst, "output": CATEGORIES[(i + j) % 5], "meta": {}}
                for j, (abst, _) in enumerate(SCHOLARS[u])]
        out.append(single("lamp2", i, u, text, label, hist, candidates=CATEGORIES))
    return out


def lamp6():
    out = []
    for i, (u, a, t) in enumerate(LAMP5_QUERIES):
        hist = [{"input": abst, "output": "Update: " + title, "meta": {}} for abst, title in SCHOLARS[u]]
        out.append(single("lamp6", i, u, "Hi team, " + a, "Update: " + t, hist))
    return out


def lamp7():
    out = []
    for i, (u, a, t) in enumerate(LAMP5_QUERIES):
        hist = [{"input": title, "output": "New paper out: " + title.lower() + "!", "meta": {}}
                for _, title in SCHOLARS[u]]
        out.append(single("lamp7", i, u, a, "New paper out: " + t.lower() + "!", hist))
    return out


def corpus(name, task, instances):
    return {"schema_version": 1, "name": name, "task": task, "split": "test",
            "instance_count": len(instances), "instances": instances}


def stats(instances):
    """CorpusStats computed from the corpus definitions, in code points."""
    first_history = {}
    slots = 0
    titles, abstracts, refs, questions = [], [], [], []
    interests = {}
    for inst in instances:
        slots += len(inst["authors"])
        for a in inst["authors"]:
            first_history.setdefault(a["id"], len(inst["histories"][a["id"]]))
        ctx = inst.get("context", {})
        if "research_interests" in ctx and len(inst["authors"]) == 1:
            interests.setdefault(inst["authors"][0]["id"], len(ctx["research_interests"]))
        titles.append(len(ctx["title"][0]))
        abstracts.append(len(ctx["abstract"][0]))
        refs.append(int(ctx["reference_count"][0]))
        if ctx.get("research_questions"):
            questions.append(sum(len(q) for q in ctx["research_questions"]))
    n = len(instances)
    return {
        "papers": n,
        "authors": len(first_history),
        "avg_authors_per_paper": slots / n,
        "avg_history_papers_per_author": float(sum(first_history.values())) / len(first_history),
        "avg_title_length": float(sum(titles)) / len(titles),
        "avg_abstract_length": float(sum(abstracts)) / len(abstracts),
        "avg_refs_per_paper": float(sum(refs)) / n,
        "avg_research_interests_per_author":
            float(sum(interests.values())) / len(interests) if interests else None,
        "avg_research_question_length": float(sum(questions)) / len(questions) if questions else None,
    }


def write(path, data):
    path.write_text(json.dumps(data, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def main():
    OUT.mkdir(parents=True, exist_ok=True)
    corpora = {
        "lamp1": lamp1(), "lamp2": lamp2(), "lamp3": lamp3(LAMP3_QUERIES), "lamp4": lamp4(),
        "lamp5": lamp5(), "lamp6": lamp6(), "lamp7": lamp7(), "up0": up0_instances(),
    }
    for task in ["psw1", "psw2", "psw3", "psw4"]:
        corpora[task] = [psw_instance(task, i, *paper) for i, paper in enumerate(PAPERS)]
    for task, instances in corpora.items():
        write(OUT / f"{task}.json", corpus(f"fixture-{task}", task, instances))
    write(OUT / "lamp3_pair.json", corpus("fixture-lamp3-pair", "lamp3", lamp3(LAMP3_PAIR, "pair")))
    write(OUT / "psw4.stats.json", stats(corpora["psw4"]))
    return 0


if __name__ == "__main__":
    sys.exit(main())
