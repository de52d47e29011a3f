package org.acme.inventory.io;

import java.io.BufferedReader;
import java.io.IOException;
import java.io.Reader;
import java.util.ArrayList;
import java.util.List;

public final class CsvReader {
    private final char separator;

    public CsvReader(char separator) {
        this.separator = separator;
    }

    public List<String[]> read(Reader source) throws IOException {
        List<String[]> rows = new ArrayList<>();
        try (BufferedReader in = new BufferedReader(source)) {
            String line;
            while ((line = in.readLine()) != null) {
                if (line.isBlank()) {
                    continue;
                }
                rows.add(Parser.split(line, separator));
            }
        }
        return rows;
    }
}
