"""Deterministic builder for the bundled corpus, validation set, exemplars and binary fixtures.

Run ``python -m modalroute.evaluation.generate`` to rebuild everything under ``modalroute/data``.
The corpus has 100 records per task category. Text categories mix short requests (gold tier
efficient) with long, structured, multi-constraint requests (gold tier premium). Follow-ups share a
session with the non-text exchange they refer to, and a set of unrelated text records also follows
non-text exchanges so that follow-up detection has negatives. Fixtures are tiny synthetic files with
real magic numbers; annotations and transcripts are keyed by content digest.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import logging
import random
from dataclasses import dataclass, field
from pathlib import Path

from ..config import DATA_DIR
from ..core import ExecutionCategory, Modality, TaskCategory, tokenize
from ..intent import DEFAULT_ANAPHORA
from .corpus import AttachmentRef, CorpusRecord, dump_corpus

logger = logging.getLogger(__name__)

T = TaskCategory
PER_CATEGORY = 100
HARD_PER_TEXT_CATEGORY = 56
COMPLEX_TEXT = 40
NEGATIVE_FOLLOWUPS = 40
SIMILARITY_FOLLOWUPS = 12
MISSING_ANNOTATION = 5


# ---------------------------------------------------------------- fixtures

IMAGE_KINDS = [
    (".png", "image/png", bytes.fromhex("89504e470d0a1a0a")),
    (".jpg", "image/jpeg", bytes.fromhex("ffd8ffe0")),
    (".gif", "image/gif", b"GIF89a"),
    (".webp", "image/webp", b"RIFF\x00\x00\x00\x00WEBPVP8 "),
]
AUDIO_KINDS = [
    (".wav", "audio/wav", b"RIFF\x00\x00\x00\x00WAVEfmt "),
    (".mp3", "audio/mpeg", b"ID3\x03\x00"),
    (".flac", "audio/flac", b"fLaC"),
    (".ogg", "audio/ogg", b"OggS\x00"),
]
VIDEO_KINDS = [
    (".mp4", "video/mp4", b"\x00\x00\x00\x18ftypmp42"),
    (".mov", "video/quicktime", b"\x00\x00\x00\x14ftypqt  "),
    (".avi", "video/x-msvideo", b"RIFF\x00\x00\x00\x00AVI LIST"),
    (".webm", "video/webm", bytes.fromhex("1a45dfa3")),
]
DOC_KINDS = [
    (".pdf", "application/pdf", b"%PDF-1.4\n"),
    (".docx", "application/vnd.openxmlformats-officedocument.wordprocessingml.document", b"PK\x03\x04"),
    (".txt", "text/plain", b""),
    (".csv", "text/csv", b""),
    (".json", "application/json", b""),
]

OBJECT_LABELS = ["car", "person", "dog", "bicycle", "bus", "traffic light", "cat", "chair", "bottle", "tree"]
SIGN_TEXT = ["OPEN 24 HOURS", "NO PARKING", "EXIT", "SALE 50% OFF", "MAIN STREET", "PLATFORM 4", "CAFE"]
TAGS = ["outdoor", "street", "daylight", "indoor", "portrait", "landscape", "night", "crowd"]

SPEECH = [
    "please move the team meeting to thursday afternoon and send the agenda to everyone",
    "the quarterly numbers look strong but shipping delays in the north region need attention",
    "remind me to call the dentist tomorrow morning and pick up groceries on the way home",
    "in this lecture we introduce photosynthesis and the role of chlorophyll in plant cells",
    "customer reports that the mobile app crashes whenever they open the settings page",
    "welcome to the podcast today we talk about remote work habits and staying focused",
    "the interview candidate has five years of backend experience and strong communication skills",
    "our flight is delayed by two hours so we will arrive at the hotel after midnight",
]


@dataclass
class FixtureBank:
    root: Path
    rng: random.Random
    annotations: dict = field(default_factory=dict)
    transcripts: dict = field(default_factory=dict)
    counts: dict = field(default_factory=dict)

    def _write(self, sub: str, stem: str, ext: str, content: bytes) -> str:
        rel = f"{sub}/{stem}{ext}"
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_bytes(content)
        return rel

    def _next(self, sub: str) -> int:
        self.counts[sub] = self.counts.get(sub, 0) + 1
        return self.counts[sub]

    def _ref(self, rel: str, ext: str, mime: str, n: int) -> tuple[AttachmentRef, bytes]:
        # a third of uploads declare their type, a third rely on the suffix, a third are opaque bytes
        mode = n % 3
        name = Path(rel).name
        if mode == 0:
            ref = AttachmentRef(rel, name, mime)
        elif mode == 1 and ext not in (".ogg", ".webm"):
            ref = AttachmentRef(rel, name, "")
        else:
            ref = AttachmentRef(rel, f"upload_{n:03d}.bin", "application/octet-stream")
        return ref, (self.root / rel).read_bytes()

    def image(self, annotate: bool = True, kind: str = "objects") -> AttachmentRef:
        n = self._next("images")
        ext, mime, magic = IMAGE_KINDS[n % len(IMAGE_KINDS)]
        body = magic + f"synthetic image {n} {kind}".encode() + self.rng.randbytes(24)
        rel = self._write("images", f"img_{n:03d}", ext, body)
        digest = hashlib.sha256(body).hexdigest()
        if annotate:
            w, h = 640.0, 480.0
            objects = []
            for _ in range(self.rng.randint(1, 5)):
                x0, y0 = self.rng.uniform(0, 400), self.rng.uniform(0, 300)
                objects.append({"label": self.rng.choice(OBJECT_LABELS), "score": round(self.rng.uniform(0.3, 0.99), 2),
                                "box": [round(x0, 1), round(y0, 1), round(x0 + self.rng.uniform(20, 230), 1),
                                        round(y0 + self.rng.uniform(20, 170), 1)]})
            text = self.rng.choice(SIGN_TEXT)
            self.annotations[digest] = {
                "bounds": [w, h],
                "object_detector": objects,
                "ocr": [{"label": "text", "span": text, "score": round(self.rng.uniform(0.8, 0.99), 2)}],
                "semantic_tagger": [{"label": t, "score": round(self.rng.uniform(0.5, 0.95), 2)}
                                    for t in self.rng.sample(TAGS, 3)],
            }
        return self._ref(rel, ext, mime, n)[0]

    def audio(self) -> AttachmentRef:
        n = self._next("audio")
        ext, mime, magic = AUDIO_KINDS[n % len(AUDIO_KINDS)]
        speech = SPEECH[n % len(SPEECH)]
        body = magic + f"synthetic audio {n}".encode() + self.rng.randbytes(32)
        rel = self._write("audio", f"clip_{n:03d}", ext, body)
        self.transcripts[hashlib.sha256(body).hexdigest()] = speech
        return self._ref(rel, ext, mime, n)[0]

    def video(self) -> AttachmentRef:
        n = self._next("video")
        ext, mime, magic = VIDEO_KINDS[n % len(VIDEO_KINDS)]
        body = magic + f"synthetic video {n}".encode() + self.rng.randbytes(32)
        rel = self._write("video", f"vid_{n:03d}", ext, body)
        return self._ref(rel, ext, mime, n)[0]

    def document(self) -> AttachmentRef:
        n = self._next("documents")
        ext, mime, magic = DOC_KINDS[n % len(DOC_KINDS)]
        if ext == ".txt":
            body = f"Meeting notes {n}\nBudget approved for the spring campaign.\nNext review in two weeks.\n".encode()
        elif ext == ".csv":
            body = f"region,units,revenue\nnorth,{100 + n},{2000 + 17 * n}\nsouth,{80 + n},{1500 + 11 * n}\n".encode()
        elif ext == ".json":
            body = json.dumps({"invoice": n, "total": 120.5 + n, "currency": "EUR"}).encode()
        else:
            body = magic + f"synthetic document {n}".encode() + self.rng.randbytes(32)
        rel = self._write("documents", f"doc_{n:03d}", ext, body)
        return self._ref(rel, ext, mime, n)[0]


# ---------------------------------------------------------------- text templates

LANGS = ["Python", "JavaScript", "TypeScript", "Rust", "Java"]
COUNTRIES = ["France", "Kenya", "Peru", "Japan", "Canada", "Norway", "Egypt", "Vietnam", "Chile", "Poland"]
TOPICS = ["coral reefs", "electric cars", "urban gardening", "the printing press", "sleep research",
          "renewable energy", "ancient Rome", "deep sea exploration", "public libraries", "honeybees"]
THINGS = ["lighthouse", "old bicycle", "autumn market", "sleepy fox", "city train", "mountain lake",
          "paper boat", "winter garden", "jazz club", "desert road"]
PRODUCTS = ["reusable water bottle", "bakery", "language app", "bike repair shop", "plant nursery"]
EMPIRES = ["Roman Empire", "Ottoman Empire", "Mali Empire", "Byzantine Empire", "Mongol Empire"]
SENTENCES = [
    "our team shipped the new dashboard two weeks late because the data pipeline kept failing overnight",
    "community volunteers planted four hundred trees along the river to reduce flooding in spring",
    "the museum extended its opening hours after record visitor numbers during the summer festival",
    "researchers found that short daily walks improved mood and concentration in office workers",
    "the city council approved a plan to convert empty parking lots into affordable housing",
]


def _math_easy(r: random.Random) -> str:
    a, b, c = r.randint(2, 9), r.randint(1, 30), r.randint(31, 90)
    return r.choice([
        f"Solve the equation {a}x + {b} = {c} and give the value of x for my homework sheet.",
        f"Calculate the area of a triangle with base {a + 3} cm and height {b} cm for a geometry quiz.",
        f"Simplify the fraction {b * 2}/{c * 2} to lowest terms and show the common factor you used.",
        f"Compute the remainder when {c * 7 + b} is divided by {a} using basic modular arithmetic rules.",
        f"Factor the quadratic polynomial x^2 + {a + b}x + {a * b} completely into two linear factors.",
        f"What is the probability of rolling a total of {a + 3} with two fair dice in one throw?",
        f"Calculate {b} percent of {c * 10} dollars to find the discount on a winter jacket purchase.",
        f"A recipe uses a ratio of {a}:{b} flour to sugar; calculate the flour needed for {c} grams of sugar.",
        f"Find the derivative of f(x) = {a}x^3 + {b}x at the point x = 2 using the power rule.",
        f"Calculate the radius of a circle whose area is {c} square meters, rounded to two decimals.",
    ])


def _math_hard(r: random.Random) -> str:
    a, b, n = r.randint(2, 6), r.randint(2, 5), r.randint(3, 9)
    return r.choice([
        (f"Work through this carefully, step by step, with full justification for each equation:\n"
         f"1. Evaluate the integral $\\int_0^{a} x^{b} e^{{-x}} dx$ (using integration by parts, repeatedly).\n"
         f"2. Differentiate the result with respect to the upper bound, and verify it against the integrand.\n"
         f"3. State the limit as the bound tends to infinity, in terms of the gamma function.\n"
         f"Show every algebraic simplification, and explain where the polynomial factor comes from."),
        (f"Prove the following theorem rigorously, by induction on n, and justify each algebra step:\n"
         f"1. Show that the sum of the first n odd numbers equals n^2 for every n >= 1.\n"
         f"2. Generalize the identity to the sum of k^{b} for k = 1..n, deriving the closed polynomial form.\n"
         f"3. Check the formula numerically for n = {n}, and discuss why the base case matters.\n"
         f"Present the proof formally, with each equation numbered, as in a textbook solution."),
        (f"Solve this probability problem in full detail, with clear reasoning at every stage:\n"
         f"1. A bag holds {a + 3} red and {b + 4} blue balls, and compute the probability of drawing two reds without replacement.\n"
         f"2. Derive the expected number of reds in {n} draws (with replacement), using linearity of expectation.\n"
         f"3. Calculate the variance, and compare it with the binomial formula $n p (1-p)$.\n"
         f"Explain each equation, and state any independence assumptions explicitly."),
        (f"Analyze the quadratic equation $x^2 - {a + b}x + {a * b} = 0$ thoroughly, step by step:\n"
         f"1. Solve it by factoring, by completing the square, and by the quadratic formula.\n"
         f"2. Prove that the sum of the roots equals {a + b} and their product equals {a * b} (Vieta's relations).\n"
         f"3. Sketch how the discriminant determines the geometry of the parabola, and compute its vertex.\n"
         f"Give each derivation with complete algebra, and simplify every expression."),
        (f"Compute the eigenvalues of the matrix [[{a}, 1], [1, {b}]] carefully, step by step:\n"
         f"1. Write the characteristic polynomial, and solve the resulting quadratic equation exactly.\n"
         f"2. Verify that the sum of the eigenvalues equals the trace, and their product the determinant.\n"
         f"3. Calculate the eigenvectors, normalize them, and prove they are orthogonal.\n"
         f"Explain the geometry of the linear map, and simplify each radical expression."),
    ])


_CODE_SNIPPETS = [
    "def dedupe(rows, key):\n    seen = []\n    out = []\n    for r in rows:\n        if r[key] not in seen:\n"
    "            seen.append(r[key]); out.append(r)\n    return out",
    "function total(items) {\n    let sum = 0;\n    for (let i = 0; i <= items.length; i++) {\n"
    "        sum += items[i].price * items[i].qty;\n    }\n    return sum;\n}",
    "def fib(n):\n    if n <= 1:\n        return n\n    return fib(n - 1) + fib(n - 2)\n\n"
    "def fib_list(k):\n    return [fib(i) for i in range(k)]",
    "class Cache:\n    def __init__(self):\n        self.data = {}\n    def get(self, k):\n"
    "        return self.data[k]\n    def put(self, k, v):\n        self.data[k] = v",
]


def _coding_easy(r: random.Random) -> str:
    lang = r.choice(LANGS)
    k = r.randint(2, 9)
    return r.choice([
        f"Show a {lang} function that returns the {k} largest values from an unsorted array of integers.",
        f"How do I reverse a linked list in {lang} without using recursion or an extra array?",
        f"My {lang} loop never terminates when the counter variable starts at zero; how do I debug this bug?",
        f"Explain what a hash map is and give a short {lang} snippet that counts word frequencies.",
        f"Give me a SQL query for the sales database that counts orders per customer in {2020 + k}.",
        f"Implement binary search over a sorted array in {lang} and return minus one when missing.",
        f"What does this {lang} exception mean and how do I fix the code: index out of range at line {k * 11}?",
        f"Refactor my {lang} class so each method has one responsibility and the api stays the same.",
        f"Create a regex in a {lang} script that matches dates like 2024-0{k}-15 inside log lines.",
        f"Set up a Dockerfile for a small {lang} api service that listens on port 80{k}0.",
    ])


def _coding_hard(r: random.Random) -> str:
    lang = r.choice(["Python", "JavaScript", "TypeScript"])
    code = r.choice(_CODE_SNIPPETS)
    task = r.choice([
        "It should deduplicate records, preserve order, and stay fast on large inputs (millions of rows)",
        "It produces wrong totals, crashes on empty input, and is far too slow on big collections",
        "It works for small cases but runs out of memory or time for larger arguments",
    ])
    return (
        f"Debug and refactor the following {lang} code. {task}:\n```\n{code}\n```\n"
        f"Explain the algorithm's complexity problem, rewrite the function with a better data structure, "
        f"add unit tests for empty input, duplicate keys, and boundary values, and document any exception the "
        f"refactored code can raise (with a short stack trace example)."
    )


def _writing_easy(r: random.Random) -> str:
    thing, topic, sent = r.choice(THINGS), r.choice(TOPICS), r.choice(SENTENCES)
    return r.choice([
        f"Summarize the key points of this sentence about {topic} in plain words: {sent}.",
        f"Write a haiku about a {thing} that captures a quiet and slightly melancholy mood.",
        f"Draft a polite email to my landlord asking for the heating repair before the {thing} festival.",
        f"Paraphrase this sentence in a friendlier tone for a newsletter: {sent}.",
        f"Write a short story opening about a {thing} on a rainy night in a small harbor town.",
        f"Proofread this sentence for grammar and tone before I send it to my manager: {sent}.",
        f"Give me a catchy headline and slogan for a {r.choice(PRODUCTS)} opening near {topic} displays.",
        f"Translate this sentence into Spanish, keeping the tone neutral: {sent}.",
        f"Write a limerick about a {thing} that keeps getting lost on the way to work.",
        f"Condense this sentence into a one line summary for a team chat update: {sent}.",
    ])


def _writing_hard(r: random.Random) -> str:
    topic, product = r.choice(TOPICS), r.choice(PRODUCTS)
    rows = "\n".join(f"| {y} | {r.randint(10, 90)}% | {r.choice(['rising', 'flat', 'falling'])} |"
                     for y in (2021, 2022, 2023))
    return r.choice([
        (f"Summarize the following article about {topic} as an executive summary, and respect every"
         f" constraint below:\n- exactly five bullet points, with the key points first\n"
         f"- a formal tone, suitable for a board abstract\n- one headline under ten words\n"
         f"| year | adoption | trend |\n|---|---|---|\n{rows}\n"
         f"The article argues that {r.choice(SENTENCES)}, while critics (mostly economists) question the cost, "
         f"the timeline, and the long-term impact on local communities."),
        (f"Rewrite this draft essay on {topic} into a persuasive blog post, keeping the outline intact:\n"
         f"- an opening paragraph with a strong hook\n- three body sections, each with a clear summary sentence\n"
         f"- a closing paragraph that a general reader can follow\n"
         f"| section | current words | target words |\n|---|---|---|\n{rows}\n"
         f"Keep the tone warm but precise, avoid jargon (unless defined), and proofread the final article."),
        (f"Write a cover letter and a short speech for the launch of a {product}, in a consistent tone:\n"
         f"- the letter should summarize the mission, in one paragraph\n- the speech should run about two minutes\n"
         f"- both need the same slogan, and end with a call to action\n"
         f"| audience | priority | notes |\n|---|---|---|\n{rows}\n"
         f"Draft both texts fully, with an outline first, and explain the key points you emphasized."),
    ])


def _general_easy(r: random.Random) -> str:
    c, topic, emp = r.choice(COUNTRIES), r.choice(TOPICS), r.choice(EMPIRES)
    return r.choice([
        f"What is the capital city of {c}, and roughly how large is the population there today?",
        f"Who was the most famous ruler of the {emp}, and what is that ruler remembered for?",
        f"Explain the difference between weather and climate in simple terms for a curious child.",
        f"How does a volcano form, and why do some volcanoes erupt more violently than others?",
        f"When did people first start writing about {topic}, and what was the early history like?",
        f"Define the word entropy as used in science, with an everyday example from a kitchen.",
        f"Recommend three good books about {topic} for someone new to the topic and explain why.",
        f"Why does the moon look larger near the horizon than high in the night sky?",
        f"Give me five fun trivia facts about {c} that visitors usually do not know.",
        f"What is the main reason the ocean is salty while most rivers carry fresh water?",
    ])


def _general_hard(r: random.Random) -> str:
    emp, c = r.choice(EMPIRES), r.choice(COUNTRIES)
    rows = "\n".join(f"| {cent} century | {r.choice(['trade', 'war', 'plague', 'reform'])} |"
                     for cent in ("12th", "14th", "16th"))
    return r.choice([
        (f"Explain, with historical context and real detail, why the {emp} declined, structured like this:\n"
         f"1. the political and military causes, with the key war in each century\n"
         f"2. the economy, trade routes, and climate pressures (as historians debate them)\n"
         f"3. the difference between the traditional theory and recent revisionist history\n"
         f"| period | main factor |\n|---|---|\n{rows}\n"
         f"Weigh the evidence for each factor, and say which explanation you find most convincing."),
        (f"Give a thorough explanation of how the economy of {c} changed over the last century, covering:\n"
         f"1. the history of its main industries, and why some of them collapsed\n"
         f"2. the population shifts between cities and the countryside, with rough numbers\n"
         f"3. the difference between the official narrative and independent accounts\n"
         f"| period | main factor |\n|---|---|\n{rows}\n"
         f"Use facts where you can, flag uncertain claims, and recommend further reading."),
        (f"Explain the science of climate feedback loops in depth, for a university-level reader:\n"
         f"1. why ice loss amplifies warming, and how the ocean absorbs heat\n"
         f"2. the difference between fast and slow feedbacks, with one example of each\n"
         f"3. how volcano eruptions and the moon's orbit enter the long-term history\n"
         f"| period | main factor |\n|---|---|\n{rows}\n"
         f"Define each technical term, and say which facts remain debated among scientists."),
    ])


def _image_gen(r: random.Random) -> str:
    subj, style = r.choice(THINGS), r.choice(["watercolor", "pixel art", "oil painting", "flat vector", "photoreal"])
    return r.choice([
        f"Generate an image of a {subj} at sunset in a {style} style with warm colors.",
        f"Create an image of a {subj} for a poster, {style} style, with lots of empty sky for a title.",
        f"Draw an illustration of a {subj} surrounded by falling leaves, in {style}.",
        f"Design a logo featuring a stylized {subj}, minimal, {style}, two colors only.",
        f"Make a digital art wallpaper of a {subj} under northern lights, {style} look.",
        f"Sketch a concept art piece showing a futuristic {subj} floating above the clouds.",
    ])


def _complex_text(r: random.Random) -> str:
    a, b = r.randint(2, 9), r.randint(10, 40)
    lang, thing, c = r.choice(LANGS), r.choice(THINGS), r.choice(COUNTRIES)
    return r.choice([
        f"Solve {a}x + {b} = {a * b}, then write a short poem that celebrates the answer.",
        f"Summarize the history of {c} in three sentences, then translate that summary into French.",
        f"Implement a {lang} function that sorts a list of names, then explain its time complexity to a beginner.",
        f"Calculate the compound interest on {b * 100} dollars at {a} percent for five years, and then draft an email to my bank about it.",
        f"Write a riddle about a {thing}; after that, explain the answer step by step.",
        f"Compare solar and wind power for {c}, then outline a short speech recommending one of them.",
        f"Debug why my {lang} script prints nothing, and also write unit tests that would have caught it.",
        f"List the planets in order from the sun, then calculate how long light takes to reach Mars.",
    ])


AMBIGUOUS = [
    "Hmm, I have been stuck on this for a while now and honestly I am not sure where to even begin, any ideas?",
    "Okay so here is the thing, I kind of need some help but I cannot quite put my finger on what exactly.",
    "I was hoping you could just take care of the usual stuff for me again, same as last time, thanks.",
    "Can you help me sort things out a bit, everything feels messy and I do not know what matters most.",
    "Not sure this makes sense but maybe you could look into it and tell me something useful about it.",
    "So many options and none of them feel right, what would a sensible person pick in my shoes?",
    "I keep going back and forth on this whole situation, could you weigh in with some honest thoughts?",
    "Just wondering whether it is worth doing at all, or whether I should simply leave everything as it is.",
    "Do the thing we talked about, but better this time, and maybe a little bit more careful overall.",
    "Something feels off with all of this lately, can you figure out what is going on here for me?",
    "Could you sort of give me a push in the right direction, I feel a little lost with everything today.",
    "Whatever you think works best is fine with me, surprise me with something good and useful please.",
    "I need a hand with this stuff, nothing urgent, but it has been on my mind for days and days.",
    "Tell me what you make of it all, I would really like a second opinion before I commit to anything.",
]
AMBIGUOUS_PREFIX = ["", "Hey, ", "Quick one: ", "Honestly, ", "Sorry to bother you, ", "Random question: ",
                    "Okay, ", "Hi there, "]


VISION_Q = [
    "Describe what is happening in this photo in a few sentences.",
    "What is the overall mood of this picture and why does it feel that way?",
    "Is this image taken indoors or outdoors, and what time of day does it look like?",
    "What style of photography is this, and what would you improve about the composition?",
    "Give me a short caption for this picture that I could post online.",
    "What season does this photo seem to show, judging by the light and colors?",
]
DETECT_Q = [
    "Count the cars in this picture and tell me where each one is.",
    "Detect every person in this image and give me their bounding boxes.",
    "How many dogs can you find in this photo?",
    "Locate all the bicycles in this image.",
    "Read the text on the sign in this photo.",
    "Extract text from this image of a storefront.",
]
DOC_Q = [
    "What are the main obligations described in this document?",
    "Pull out the total amount and currency from this file.",
    "What deadline is mentioned in this report?",
    "Which section of this document discusses the budget?",
    "Give me the gist of this file in two sentences.",
    "What does this spreadsheet say about the north region?",
]
AUDIO_Q = [
    "What does the speaker ask for in this recording?",
    "Transcribe and summarize this voice memo for me.",
    "What is the tone of the speaker in this audio clip?",
    "List any dates or times mentioned in this recording.",
    "Who is this message probably intended for?",
]
VIDEO_Q = [
    "Summarize what happens in this clip.",
    "What is the main activity shown in this video?",
    "At what point does the scene change in this video?",
    "Describe the setting of this video in detail.",
    "Is there any text or signage visible in this clip?",
]
FOLLOWUP_Q = {
    Modality.IMAGE: ["What color is the largest object in that image?", "Can you tell me more about the background of the picture?",
                     "Is there anything unusual in the photo that I should notice?", "Would the image work as a book cover?"],
    Modality.DOCUMENT: ["Which page of the document mentions the deadline?", "Can you quote the exact sentence from the file?",
                        "Is the tone of the document formal or casual?", "Does the document say who approved it?"],
    Modality.AUDIO: ["What did the speaker say right at the start of the recording?", "Does the speaker sound stressed in the audio?",
                     "Can you repeat the request from the recording as a to-do item?", "How long is the recording roughly?"],
    Modality.VIDEO: ["What happens at the very end of the video?", "Who appears first in the clip?",
                     "Is the video filmed in one continuous shot?", "What music plays in the video, if any?"],
}
CASCADE_Q = [
    ("Compare what the speaker says with what the photo shows.", (Modality.IMAGE, Modality.AUDIO)),
    ("Check whether the chart in the picture matches the numbers in the report.", (Modality.IMAGE, Modality.DOCUMENT)),
    ("Does the narration in the recording match the events of the video?", (Modality.VIDEO, Modality.AUDIO)),
    ("Summarize the document and describe the attached photo together.", (Modality.DOCUMENT, Modality.IMAGE)),
    ("", (Modality.IMAGE, Modality.AUDIO)),
    ("", (Modality.DOCUMENT, Modality.VIDEO)),
    ("Describe this photo, then write a caption for social media.", (Modality.IMAGE,)),
    ("Summarize this recording, then draft a reply email to the speaker.", (Modality.AUDIO,)),
    ("Extract the totals from this file, then explain whether the budget is healthy.", (Modality.DOCUMENT,)),
    ("Describe the opening scene of this video and then list the people who appear.", (Modality.VIDEO,)),
]

_ANAPHORA_TOKENS = [tuple(tokenize(p)) for p in DEFAULT_ANAPHORA]


def mentions_anaphora(text: str) -> bool:
    toks = tokenize(text)
    return any(tuple(toks[i:i + len(p)]) == p for p in _ANAPHORA_TOKENS for i in range(len(toks) - len(p) + 1))


TEXT_BUILDERS = {
    T.MATH: (_math_easy, _math_hard),
    T.CODING: (_coding_easy, _coding_hard),
    T.SUMMARIZATION_WRITING: (_writing_easy, _writing_hard),
    T.GENERAL: (_general_easy, _general_hard),
}

MODALITY_CATEGORY = {Modality.IMAGE: T.VISION, Modality.DOCUMENT: T.DOCUMENT, Modality.AUDIO: T.AUDIO,
                     Modality.VIDEO: T.VIDEO}
PIPELINE_LABEL = {m: f"pipeline:{m.value}" for m in MODALITY_CATEGORY}

# second-annotator confusions used for the agreement statistic
CONFUSABLE = {
    T.MATH: T.CODING, T.CODING: T.MATH, T.SUMMARIZATION_WRITING: T.GENERAL, T.GENERAL: T.SUMMARIZATION_WRITING,
    T.VISION: T.OBJECT_DETECT, T.OBJECT_DETECT: T.VISION, T.DOCUMENT: T.SUMMARIZATION_WRITING, T.AUDIO: T.VIDEO,
    T.VIDEO: T.AUDIO, T.IMAGE_GEN: T.VISION, T.TEXT_MOE: T.GENERAL, T.COMPLEX: T.AMBIGUOUS, T.AMBIGUOUS: T.GENERAL,
}


def _modality_of(text: str, mods: tuple[Modality, ...]) -> Modality:
    if not mods:
        return Modality.TEXT
    if len(set(mods)) > 1:
        return Modality.MULTIMODAL
    only = mods[0]
    return Modality.MULTIMODAL if text.strip() and only is not Modality.DOCUMENT else only


def _execution_of(text: str, mods) -> ExecutionCategory:
    if not mods:
        return ExecutionCategory.TEXT_ONLY
    return ExecutionCategory.HYBRID if text.strip() else ExecutionCategory.NON_TEXT


class Builder:
    def __init__(self, seed: int, root: Path) -> None:
        self.rng = random.Random(seed)
        self.fx = FixtureBank(root / "fixtures", random.Random(seed + 1))
        self.sessions: list[list[dict]] = []
        self.seen: set[str] = set()

    def unique(self, make, *, allow_anaphora: bool = True) -> str:
        for _ in range(500):
            text = make(self.rng)
            if text not in self.seen and (allow_anaphora or not mentions_anaphora(text)):
                self.seen.add(text)
                return text
        text = make(self.rng)
        n = 2
        while text + f" (variant {n})" in self.seen:
            n += 1
        text = text + f" (variant {n})"
        self.seen.add(text)
        return text

    def attach(self, m: Modality, annotate: bool = True) -> AttachmentRef:
        if m is Modality.IMAGE:
            return self.fx.image(annotate)
        if m is Modality.AUDIO:
            return self.fx.audio()
        if m is Modality.VIDEO:
            return self.fx.video()
        return self.fx.document()

    @staticmethod
    def spec(text, cat, tier, route, mods=(), refs=(), provenance="", followup=None) -> dict:
        return {"text": text, "category": cat, "tier": tier, "route": route, "mods": tuple(mods),
                "refs": tuple(refs), "provenance": provenance, "followup": followup}

    def text_record(self, cat: T, hard: bool, allow_anaphora: bool = True) -> dict:
        easy, hard_fn = TEXT_BUILDERS[cat]
        text = self.unique(hard_fn if hard else easy, allow_anaphora=allow_anaphora)
        return self.spec(text, cat, "premium" if hard else "efficient", "premium" if hard else "efficient",
                         provenance=f"template:{cat.value}/{'hard' if hard else 'easy'}")

    def nontext_record(self, cat: T, with_text: bool, annotate: bool = True) -> dict:
        if cat is T.OBJECT_DETECT:
            m, text = Modality.IMAGE, self.rng.choice(DETECT_Q)
            ref = self.fx.image(annotate)
            return self.spec(text, cat, "efficient", "couplet", [m], [ref],
                             "template:object_detect" + ("" if annotate else "/unannotated"))
        m = {T.VISION: Modality.IMAGE, T.DOCUMENT: Modality.DOCUMENT, T.AUDIO: Modality.AUDIO, T.VIDEO: Modality.VIDEO}[cat]
        bank = {T.VISION: VISION_Q, T.DOCUMENT: DOC_Q, T.AUDIO: AUDIO_Q, T.VIDEO: VIDEO_Q}[cat]
        text = self.rng.choice(bank) if with_text else ""
        return self.spec(text, cat, "efficient", PIPELINE_LABEL[m], [m], [self.attach(m)],
                         f"template:{cat.value}/{'hybrid' if with_text else 'attachment_only'}")

    def build(self) -> list[CorpusRecord]:
        r = self.rng
        singles: list[dict] = []
        neg_pool: dict[T, list[dict]] = {c: [] for c in TEXT_BUILDERS}

        for cat in TEXT_BUILDERS:
            hard_flags = [True] * HARD_PER_TEXT_CATEGORY + [False] * (PER_CATEGORY - HARD_PER_TEXT_CATEGORY)
            r.shuffle(hard_flags)
            negatives = NEGATIVE_FOLLOWUPS // len(TEXT_BUILDERS)
            for hard in hard_flags:
                if not hard and len(neg_pool[cat]) < negatives:
                    neg_pool[cat].append(self.text_record(cat, False, allow_anaphora=False))
                else:
                    singles.append(self.text_record(cat, hard))

        for _ in range(PER_CATEGORY):
            singles.append(self.spec(self.unique(_image_gen), T.IMAGE_GEN, "premium", "pipeline:image_gen",
                                     provenance="template:image_gen"))
        for _ in range(COMPLEX_TEXT):
            singles.append(self.spec(self.unique(_complex_text), T.COMPLEX, "premium", "premium",
                                     provenance="template:complex/text"))
        for i in range(PER_CATEGORY - COMPLEX_TEXT):
            text, mods = CASCADE_Q[i % len(CASCADE_Q)]
            refs = [self.attach(m) for m in mods]
            singles.append(self.spec(text, T.COMPLEX, "efficient", "agent_cascade", mods, refs,
                                     "template:complex/multimodal"))
        for i in range(PER_CATEGORY):
            base = AMBIGUOUS[i % len(AMBIGUOUS)]
            text = AMBIGUOUS_PREFIX[(i // len(AMBIGUOUS)) % len(AMBIGUOUS_PREFIX)] + base
            singles.append(self.spec(text, T.AMBIGUOUS, "efficient", "agent_cascade", provenance="authored:ambiguous"))

        # non-text categories: some records anchor follow-up or negative sessions
        nontext: list[dict] = []
        for cat in (T.VISION, T.DOCUMENT, T.AUDIO, T.VIDEO, T.OBJECT_DETECT):
            for i in range(PER_CATEGORY):
                annotate = not (cat is T.OBJECT_DETECT and i < MISSING_ANNOTATION)
                nontext.append(self.nontext_record(cat, with_text=(i % 4 != 0), annotate=annotate))
        r.shuffle(nontext)
        anchors_fu = nontext[:PER_CATEGORY]
        anchors_neg = nontext[PER_CATEGORY:PER_CATEGORY + NEGATIVE_FOLLOWUPS]
        rest = nontext[PER_CATEGORY + NEGATIVE_FOLLOWUPS:]

        sessions: list[list[dict]] = [[s] for s in singles + rest]
        for k, anchor in enumerate(anchors_fu):
            m = anchor["mods"][0]
            if k < SIMILARITY_FOLLOWUPS and anchor["text"]:
                # no anaphora: the follow-up restates the earlier request
                text = "More detail please: " + anchor["text"].rstrip("?.") + ", especially the finer points."
                prov = "authored:followup/restated"
            else:
                text = r.choice(FOLLOWUP_Q[m])
                prov = "authored:followup/anaphora"
            fu = self.spec(text, T.TEXT_MOE, "efficient", "followup", provenance=prov, followup=anchor)
            sessions.append([anchor, fu])
        negs = [x for pool in neg_pool.values() for x in pool]
        for anchor, neg in zip(anchors_neg, negs):
            neg["provenance"] += "/after_non_text"
            sessions.append([anchor, neg])
        r.shuffle(sessions)

        records: list[CorpusRecord] = []
        clock = 0
        for sidx, sess in enumerate(sessions):
            sid = f"s{sidx:04d}"
            for spec in sess:
                clock += 1000 if spec is sess[0] else 5000
                rid = f"r{len(records):04d}"
                spec["id"] = rid
                target = spec["followup"]["id"] if spec["followup"] else None
                mods = spec["mods"]
                cat = spec["category"]
                second = CONFUSABLE[cat] if r.random() < 0.06 else cat
                records.append(CorpusRecord(
                    id=rid, text=spec["text"], gold_category=cat, gold_modality=_modality_of(spec["text"], mods),
                    gold_execution=(ExecutionCategory.FOLLOW_UP if target else _execution_of(spec["text"], mods)),
                    gold_tier=spec["tier"], gold_route=spec["route"], attachments=spec["refs"],
                    gold_attachments=tuple(mods), session_id=sid, arrived_at=clock, followup_target=target,
                    annotators=(cat, second), provenance=spec["provenance"],
                ))
        return records

    def validation(self, n_per: int = 50) -> list[CorpusRecord]:
        out = []
        for cat in TEXT_BUILDERS:
            for i in range(n_per):
                spec = self.text_record(cat, hard=self.rng.random() < 0.5)
                rid = f"v{len(out):04d}"
                out.append(CorpusRecord(
                    id=rid, text=spec["text"], gold_category=cat, gold_modality=Modality.TEXT,
                    gold_execution=ExecutionCategory.TEXT_ONLY, gold_tier=spec["tier"], gold_route=spec["route"],
                    session_id=rid, provenance=spec["provenance"],
                ))
        return out


EXEMPLARS: dict[T, list[str]] = {
    T.MATH: [
        "solve for the unknown in this linear equation", "what is seven times eight minus twelve",
        "find the derivative of the curve at a point", "how do I integrate this function over an interval",
        "work out the probability of two independent events", "compute the mean and median of these numbers",
        "prove that the square root of two is irrational", "simplify this algebraic expression with exponents",
        "what is the area of a circle with a given radius", "convert this fraction to a decimal and percent",
    ],
    T.CODING: [
        "write a function that parses a csv file", "why does my python program throw a type error",
        "implement a stack with push and pop operations", "optimize this loop that iterates over a large list",
        "how do I call a rest api from javascript", "fix the null pointer exception in my java method",
        "write unit tests for this sorting routine", "explain how recursion works with a code example",
        "set up a git branch and merge it back", "create a class with getters and setters",
    ],
    T.SUMMARIZATION_WRITING: [
        "summarize this article in a few sentences", "write a short poem about the sea",
        "draft a professional email to a client", "rewrite this paragraph to sound more formal",
        "give me the key points of this passage", "write a birthday message for my friend",
        "compose a story about a lost dog finding home", "make this text shorter and clearer",
        "write a product description for an online store", "turn these notes into a cover letter",
    ],
    T.GENERAL: [
        "what is the tallest mountain in the world", "who invented the telephone",
        "why is the sky blue during the day", "how do airplanes stay in the air",
        "what are the health benefits of green tea", "when did the first world war start",
        "explain how vaccines train the immune system", "what is the difference between a virus and bacteria",
        "recommend a good hobby for rainy weekends", "how many people live in tokyo",
    ],
    T.IMAGE_GEN: [
        "generate a picture of a castle in the clouds", "draw a cartoon cat wearing a hat",
        "create artwork of a neon city at night", "make an illustration for a children's book",
        "render a realistic photo of a red sports car", "paint a landscape with mountains and a lake",
        "design an icon for a weather app", "produce a poster for a summer music festival",
    ],
}


def write_all(root: Path = DATA_DIR, seed: int = 20240601) -> dict:
    root.mkdir(parents=True, exist_ok=True)
    b = Builder(seed, root)
    corpus = b.build()
    validation = b.validation()
    dump_corpus(corpus, root / "corpus.jsonl")
    dump_corpus(validation, root / "validation.jsonl")
    with open(root / "exemplars.jsonl", "w", encoding="utf-8") as fh:
        for cat, texts in EXEMPLARS.items():
            for t in texts:
                fh.write(json.dumps({"category": cat.value, "text": t}) + "\n")
    fx = root / "fixtures"
    (fx / "annotations.json").write_text(json.dumps(b.fx.annotations, indent=1, sort_keys=True))
    (fx / "transcripts.json").write_text(json.dumps(b.fx.transcripts, indent=1, sort_keys=True))
    return {"corpus": len(corpus), "validation": len(validation), "fixtures": dict(b.fx.counts)}


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description="Rebuild the bundled evaluation data")
    ap.add_argument("--out", default=str(DATA_DIR))
    ap.add_argument("--seed", type=int, default=20240601)
    args = ap.parse_args(argv)
    print(json.dumps(write_all(Path(args.out), args.seed)))


if __name__ == "__main__":
    main()
