"""Well-behaved batch-protocol stub: replies with the mean of each row."""
import sys


def main():
    while True:
        header = sys.stdin.readline()
        if not header:
            return
        _, k, p = header.split()
        k, p = int(k), int(p)
        replies = []
        for _ in range(k):
            cells = sys.stdin.readline().rstrip("\n").split(",")
            total = 0.0
            for cell in cells:
                total += float(cell)
            replies.append(total / p)
        for value in replies:
            sys.stdout.write(format(value, ".17g") + "\n")
        sys.stdout.flush()


if __name__ == "__main__":
    main()
