from fla_slt.corpus.batch import Batch, collate, uncollate
from fla_slt.corpus.sign_video import Corpus, SignVideo
from fla_slt.corpus.storage import load_corpus, save_corpus
from fla_slt.corpus.synthetic import (
    SyntheticSpec,
    build_base_vocabulary,
    generate_monolingual_sentences,
    generate_synthetic_corpus,
)
from fla_slt.corpus.vocabulary import TokenSequence, Vocabulary, detokenize, tokenize, trim_vocabulary
