"""Exception hierarchy shared by all pipeline stages."""


class StructuraError(Exception):
    """Base class for every error raised by this package."""


# ingest
class MalformedMidi(StructuraError):
    pass


class UnsupportedFormat(StructuraError):
    pass


class EmptyTranscription(StructuraError):
    pass


class ManifestParseError(StructuraError):
    pass


class MissingFile(StructuraError):
    pass


class DuplicateId(StructuraError):
    pass


# align / features
class EmptySequence(StructuraError):
    pass


class PathUnavailable(StructuraError):
    """The DP matrix would exceed the cell budget but a warping path was requested."""


class MissingPath(StructuraError):
    pass


class UnclusterablePiece(StructuraError):
    pass


class PairAlignmentError(StructuraError):
    def __init__(self, id_i, id_j, cause):
        super().__init__(f"alignment of {id_i!r} vs {id_j!r} failed: {cause}")
        self.id_i = id_i
        self.id_j = id_j
        self.cause = cause


# cluster / metrics / tune / synth
class InvalidMatrix(StructuraError):
    pass


class EmptyScoreSet(StructuraError):
    pass


class MissingLabels(StructuraError):
    pass


class PieceError(StructuraError):
    def __init__(self, piece_id, cause):
        super().__init__(f"piece {piece_id!r}: {cause}")
        self.piece_id = piece_id
        self.cause = cause


class InvalidSpec(StructuraError):
    pass
