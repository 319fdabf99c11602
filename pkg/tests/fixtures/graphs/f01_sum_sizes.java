import java.util.List;
public int sumSizes(List<String> items, int offset) {
    int total = 0;
    int n = items.size();
    total = total + offset + n;
    return total;
}
